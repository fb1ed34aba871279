"""Kernel backend selection.

The compiled extension is used when importable; setting the environment
variable ``CPCISING_PURE_PYTHON=1`` forces the pure-Python fallback.
"""
import os

from . import _kernels_py

if os.environ.get("CPCISING_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = _impl.BACKEND
enumerate_energies = _impl.enumerate_energies
run_sweeps = _impl.run_sweeps


def available_backends():
    """Map of backend name to kernel module, for benchmarks and cross-checks."""
    backends = {"python": _kernels_py}
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        backends["cython"] = _kernels
    return backends
