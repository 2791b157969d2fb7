"""Kernel backend selection.

``BALLPACK_KERNELS=numba`` (default when numba imports) uses the compiled
loops in ``_kernels_numba``; ``BALLPACK_KERNELS=numpy`` forces the
vectorized fallback.  Both return identical layouts.
"""

import logging
import os

import numpy as np

from . import _kernels_numpy

logger = logging.getLogger(__name__)

_BACKENDS = {"numpy": _kernels_numpy}
try:
    from . import _kernels_numba
    _BACKENDS["numba"] = _kernels_numba
except ImportError:  # pragma: no cover - depends on the environment
    _kernels_numba = None

_impl = None
backend_name = None


def set_backend(name: str) -> None:
    global _impl, backend_name
    name = name.lower()
    if name not in _BACKENDS:
        if name == "numba":
            logger.warning("numba unavailable; using numpy kernels")
            name = "numpy"
        else:
            raise ValueError(f"unknown kernel backend {name!r}; expected 'numba' or 'numpy'")
    _impl = _BACKENDS[name]
    backend_name = name


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


set_backend(os.environ.get("BALLPACK_KERNELS", "numba"))


def _as_r4(r4):
    return np.ascontiguousarray(r4, dtype=np.float64)


def q_values(r4):
    return _impl.q_values(_as_r4(r4))


def volumes(r4):
    return _impl.volumes(_as_r4(r4))


def tet_batch(r4):
    return _impl.tet_batch(_as_r4(r4))


def angle_jacobian(r4, volume):
    return _impl.angle_jacobian(_as_r4(r4), np.ascontiguousarray(volume, dtype=np.float64))


def incidence_sum(flat, incidence):
    return _impl.incidence_sum(np.ascontiguousarray(flat, dtype=np.float64), incidence)
