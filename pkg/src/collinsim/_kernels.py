"""Kernel backend selection.

The compiled extension is preferred when importable; the NumPy fallback is
always available. ``COLLIN_BACKEND=python|compiled`` forces a choice
(``compiled`` raises if the extension is missing).
"""

import os

from . import _purekernel

_choice = os.environ.get("COLLIN_BACKEND", "auto").lower()

if _choice == "python":
    _impl = _purekernel
elif _choice == "compiled":
    from . import _fastcore as _impl
else:
    try:
        from . import _fastcore as _impl
    except ImportError:
        _impl = _purekernel

BACKEND = _impl.BACKEND_NAME

train_linear = _impl.train_linear
lowess_smooth = _impl.lowess_smooth


def available_backends():
    """Names of importable kernel backends."""
    names = ["python"]
    try:
        from . import _fastcore  # noqa: F401
        names.append("compiled")
    except ImportError:
        pass
    return names


def get_backend(name):
    """Return a specific backend module ('python' or 'compiled')."""
    if name == "python":
        return _purekernel
    if name == "compiled":
        from . import _fastcore
        return _fastcore
    raise ValueError(f"unknown backend {name!r}")
