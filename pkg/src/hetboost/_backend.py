"""Select the kernel backend at import time.

The compiled extension (``hetboost._core``) is preferred when it was built;
otherwise the numpy fallback (``hetboost._pycore``) is used.  Set
``HETBOOST_BACKEND=python`` or ``HETBOOST_BACKEND=compiled`` to force one.
Both backends produce bit-identical results, so the choice only affects
speed.

Modules read the module attribute ``active`` at call time, which lets tests
and benchmarks swap backends with :func:`select`.
"""

import os

from . import _pycore

try:
    from . import _core
except ImportError:
    _core = None

_BACKENDS = {"python": _pycore, "compiled": _core}


def available():
    """Names of the backends importable in this environment."""
    return tuple(name for name, mod in _BACKENDS.items() if mod is not None)


def get(name):
    mod = _BACKENDS.get(name)
    if mod is None:
        raise ValueError(f"backend {name!r} is not available (have: {available()})")
    return mod


def select(name):
    """Make ``name`` the active backend; returns the previous one's name."""
    global active
    previous = active.BACKEND_NAME
    active = get(name)
    return previous


_env = os.environ.get("HETBOOST_BACKEND", "").strip().lower()
if _env:
    active = get(_env)
elif _core is not None:
    active = _core
else:
    active = _pycore
