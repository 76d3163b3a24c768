"""Backend selection for the cascade kernels.

The compiled extension is used when it imports; otherwise the pure-Python
module takes over. :func:`use_backend` switches explicitly (tests and the
benchmark compare the two).
"""

from __future__ import annotations

from contextlib import contextmanager

from . import _cascade_py

try:
    from . import _cascade as _compiled
except ImportError:  # extension not built
    _compiled = None

_BACKENDS = {"python": _cascade_py}
if _compiled is not None:
    _BACKENDS["compiled"] = _compiled

_active = _compiled if _compiled is not None else _cascade_py


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def backend_name() -> str:
    return "compiled" if _active is _compiled and _compiled is not None else "python"


def set_backend(name: str) -> None:
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} unavailable; have {available_backends()}")
    _active = _BACKENDS[name]


@contextmanager
def use_backend(name: str):
    previous = backend_name()
    set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)


def cascade_mask(*args):
    return _active.cascade_mask(*args)


def cascade_sums(*args):
    return _active.cascade_sums(*args)


def live_edge_components(*args):
    return _active.live_edge_components(*args)
