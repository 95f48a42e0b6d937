"""JIT selection.

Hot kernels are written once as plain Python/numpy and compiled with
``numba.njit`` when numba is importable and ``NLDECAY_DISABLE_JIT`` is unset
(or ``0``).  The flag is read at call time so tests can flip it.
"""

import os

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False

ENV_FLAG = "NLDECAY_DISABLE_JIT"


def jit_enabled():
    return HAS_NUMBA and os.environ.get(ENV_FLAG, "0").lower() in ("", "0", "false", "no")


class Kernel:
    """A kernel with a lazily compiled twin.

    Calling the object dispatches to the compiled version or to the pure
    Python function depending on :func:`jit_enabled`.
    """

    def __init__(self, py_func, fallback=None):
        self.py_func = py_func
        self.fallback = fallback or py_func
        self._compiled = None
        self.__name__ = py_func.__name__
        self.__doc__ = py_func.__doc__

    @property
    def compiled(self):
        if self._compiled is None:
            self._compiled = numba.njit(cache=True)(self.py_func)
        return self._compiled

    def __call__(self, *args):
        if jit_enabled():
            return self.compiled(*args)
        return self.fallback(*args)


def kernel(fallback=None):
    """Decorator form of :class:`Kernel`.

    ``fallback`` replaces the plain-Python body on the non-JIT path, which lets
    a vectorised numpy routine stand in for a scalar loop.
    """

    def wrap(func):
        return Kernel(func, fallback)

    return wrap


def scalar_helper(func):
    """njit a helper called from inside other kernels (identity without numba)."""
    if HAS_NUMBA:
        return numba.njit(cache=True)(func)
    return func


def py(func):
    """Plain-Python body of a helper produced by :func:`scalar_helper`."""
    return getattr(func, "py_func", func)
