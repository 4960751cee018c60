"""Kernel backend selection.

The compiled extension is used when importable; set ``MONIFRAC_BACKEND``
to ``python`` to force the numpy fallback (``compiled`` makes a missing
extension an error).
"""
import logging
import os

from . import _pykernels

log = logging.getLogger(__name__)

try:
    from . import _kernels as _compiled
except ImportError:  # pragma: no cover - depends on the build
    _compiled = None

_choice = os.environ.get("MONIFRAC_BACKEND", "auto").lower()
if _choice not in ("auto", "compiled", "python"):
    raise ImportError(f"MONIFRAC_BACKEND must be auto, compiled or python, got {_choice!r}")
if _choice == "compiled" and _compiled is None:
    raise ImportError("MONIFRAC_BACKEND=compiled but monifrac._kernels is not built")

BACKENDS = {"python": _pykernels}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled

DEFAULT = "python" if _choice == "python" or _compiled is None else "compiled"
if DEFAULT == "python":
    log.debug("using pure-Python kernels")


def get(name=None):
    """Kernel module by name; ``None`` gives the import-time default."""
    name = name or DEFAULT
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown or unavailable backend {name!r}; have {sorted(BACKENDS)}") from None
