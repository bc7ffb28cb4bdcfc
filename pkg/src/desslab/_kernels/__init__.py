"""Hot kernels with a compiled core and a pure-numpy fallback.

The compiled extension is used when it was built and importable; setting
``DESSLAB_PURE=1`` forces the fallback. ``BACKEND`` names the active one.
"""
import os

from . import _fallback
from ._fallback import BLOWUP, CONVERGED, RUNNING, sym_pinv

try:
    from . import _riccati as _compiled
except ImportError:  # extension not built
    _compiled = None

COMPILED_AVAILABLE = _compiled is not None


def _select(name):
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernel extension is not built")
        return _compiled
    if name == "python":
        return _fallback
    raise ValueError(f"unknown kernel backend {name!r}")


def available_backends():
    return ["compiled", "python"] if COMPILED_AVAILABLE else ["python"]


_force_pure = os.environ.get("DESSLAB_PURE", "").strip() not in ("", "0")
BACKEND = "python" if (_force_pure or not COMPILED_AVAILABLE) else "compiled"
_impl = _select(BACKEND)


def set_backend(name):
    """Switch the active backend; returns the previous name."""
    global BACKEND, _impl
    impl = _select(name)
    prev, BACKEND, _impl = BACKEND, name, impl
    return prev


def get_backend(name=None):
    return _impl if name is None else _select(name)


def riccati_steps(*args):
    return _impl.riccati_steps(*args)


def riccati_step(A, B, Q, R, P, pinv_rel_tol):
    return _impl.riccati_step(A, B, Q, R, P, pinv_rel_tol)


__all__ = [
    "BACKEND", "BLOWUP", "CONVERGED", "COMPILED_AVAILABLE", "RUNNING",
    "available_backends", "get_backend", "riccati_step", "riccati_steps",
    "set_backend", "sym_pinv",
]
