"""Backend selection for the CPMG coherence kernels.

The compiled extension is preferred when importable; otherwise the numpy
fallback is used.  Set NVBATH_KERNEL=python to force the fallback or
NVBATH_KERNEL=cython to require the extension (ImportError if missing).
Both backends expose the same functions and agree to double precision.
"""
import os

_choice = os.environ.get("NVBATH_KERNEL", "").strip().lower()
if _choice not in ("", "python", "cython"):
    raise ImportError(f"NVBATH_KERNEL={_choice!r}; expected 'python' or 'cython'")

if _choice == "python":
    from . import _kernels_py as _impl
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        if _choice == "cython":
            raise
        from . import _kernels_py as _impl

BACKEND = _impl.BACKEND
coherence_factors = _impl.coherence_factors
coherence_nsweep = _impl.coherence_nsweep
coherence_scan = _impl.coherence_scan
unit_geometry = _impl.unit_geometry

__all__ = [
    "BACKEND",
    "coherence_factors",
    "coherence_nsweep",
    "coherence_scan",
    "unit_geometry",
]
