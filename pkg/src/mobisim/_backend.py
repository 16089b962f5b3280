"""Kernel backend selection.

The compiled extension is preferred when importable; otherwise the
pure-Python fallback takes over. Both expose the same kernel surface and
produce bit-identical results. Set ``MOBISIM_BACKEND=python`` or
``MOBISIM_BACKEND=compiled`` to force a choice (forcing ``compiled`` when
the extension is missing is an error).
"""

from __future__ import annotations

import os

from . import _kernels_py
from .errors import ValidationError

try:
    from . import _kernels_c
except ImportError:  # pragma: no cover - depends on the build environment
    _kernels_c = None

_BACKENDS = {"python": _kernels_py, "compiled": _kernels_c}


def get_kernels(name: str | None = None):
    """Return the kernel module for ``name`` (default: best available)."""
    if name is None:
        return _kernels_c if _kernels_c is not None else _kernels_py
    if name not in _BACKENDS:
        raise ValidationError(f"unknown backend {name!r}; choose 'python' or 'compiled'")
    module = _BACKENDS[name]
    if module is None:
        raise ValidationError("compiled backend requested but the extension is not built")
    return module


def available_backends() -> tuple[str, ...]:
    return tuple(name for name, module in _BACKENDS.items() if module is not None)


kernels = get_kernels(os.environ.get("MOBISIM_BACKEND") or None)

BACKEND = kernels.BACKEND_NAME
