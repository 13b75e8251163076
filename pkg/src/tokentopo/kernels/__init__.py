"""Hot inner loops: clique expansion, Z/2 boundary reduction, Gini split search.

The compiled extension ``_ckernels`` is used when it imports; otherwise the
numpy fallback in ``_pykernels`` is selected. Set ``TOKENTOPO_KERNELS=python``
to force the fallback. Both backends return identical results.
"""

import logging
import os
from types import ModuleType

from . import _pykernels

log = logging.getLogger(__name__)

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    BACKENDS["compiled"] = _ckernels


def _select() -> str:
    wanted = os.environ.get("TOKENTOPO_KERNELS", "").strip().lower()
    if wanted:
        if wanted not in BACKENDS:
            log.warning("kernel backend %r unavailable, using fallback", wanted)
            return "python"
        return wanted
    return "compiled" if "compiled" in BACKENDS else "python"


_active = _select()


def backend_name() -> str:
    return _active


def get(name: str | None = None) -> ModuleType:
    """Kernel namespace for ``name`` (default: the active backend)."""
    if name is None:
        name = _active
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown or unbuilt kernel backend: {name!r}") from None


def set_backend(name: str) -> None:
    global _active
    get(name)
    _active = name
