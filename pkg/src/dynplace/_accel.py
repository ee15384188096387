"""Backend switch for the compiled kernels.

Set ``DYNPLACE_NUMBA=0`` in the environment to force the pure-numpy path.
The switch can also be flipped at runtime with :func:`use_numba`, which is
what the benchmark and the backend-parity tests do.
"""
import os

try:
    from numba import njit as _njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover
    _njit = None
    NUMBA_AVAILABLE = False

_FALSY = {"0", "false", "no", "off"}

_state = {
    "numba": NUMBA_AVAILABLE
    and os.environ.get("DYNPLACE_NUMBA", "1").strip().lower() not in _FALSY
}


def numba_enabled():
    return _state["numba"]


def use_numba(flag):
    """Enable or disable the numba kernels; returns the previous setting."""
    prev = _state["numba"]
    if flag and not NUMBA_AVAILABLE:
        raise RuntimeError("numba is not installed")
    _state["numba"] = bool(flag)
    return prev


def jit(fn):
    """``njit(cache=True)`` when numba is importable, identity otherwise."""
    if _njit is None:  # pragma: no cover
        return fn
    return _njit(cache=True)(fn)


def dispatch(jitted, fallback):
    """Build a callable that routes to ``jitted`` or ``fallback`` per call."""

    def call(*args):
        if _state["numba"]:
            return jitted(*args)
        return fallback(*args)

    call.__name__ = fallback.__name__.removesuffix("_np")
    call.__doc__ = fallback.__doc__
    call.jitted = jitted
    call.fallback = fallback
    return call
