"""Select the kernel backend once at import.

The compiled Cython extension is preferred when built; otherwise the
numpy fallback is used. GRIDGAZE_BACKEND=python forces the fallback,
GRIDGAZE_BACKEND=compiled requires the extension (and fails loudly if
it is missing). Within a process all callers share one backend, which
keeps repeated runs bit-reproducible.
"""

import os

_choice = os.environ.get("GRIDGAZE_BACKEND", "auto").strip().lower()

if _choice in ("python", "py", "numpy"):
    from gridgaze import _pykernels as kernels
    BACKEND = "python"
elif _choice in ("auto", "", "c", "compiled"):
    try:
        from gridgaze import _ckernels as kernels  # type: ignore[no-redef]
        BACKEND = "compiled"
    except ImportError:
        if _choice in ("c", "compiled"):
            raise ImportError(
                "GRIDGAZE_BACKEND=compiled but the extension is not built")
        from gridgaze import _pykernels as kernels
        BACKEND = "python"
else:
    raise ValueError(f"unknown GRIDGAZE_BACKEND value {_choice!r}")
