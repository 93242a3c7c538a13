"""Kernel backend selection.

The compiled extension is preferred when importable; the NumPy fallback
is always available.  ``TMREC_BACKEND=python|cython`` forces a choice.
Both backends produce bit-identical models for the same seed.
"""

from __future__ import annotations

import os
from types import ModuleType

from ..exceptions import BackendUnavailable

_cache: dict[str, ModuleType] = {}


def get_kernel(name: str | None = None) -> ModuleType:
    if name is None:
        name = os.environ.get("TMREC_BACKEND", "auto")
    if name in _cache:
        return _cache[name]

    if name == "python":
        from . import _kernel_py as kernel
    elif name == "cython":
        try:
            from . import _kernel_cy as kernel  # type: ignore[no-redef]
        except ImportError as exc:
            raise BackendUnavailable("compiled backend not built") from exc
    elif name == "auto":
        try:
            from . import _kernel_cy as kernel  # type: ignore[no-redef]
        except ImportError:
            from . import _kernel_py as kernel
    else:
        raise BackendUnavailable(f"unknown backend {name!r}")

    _cache[name] = kernel
    return kernel


def available_backends() -> tuple[str, ...]:
    names = ["python"]
    try:
        get_kernel("cython")
        names.insert(0, "cython")
    except BackendUnavailable:
        pass
    return tuple(names)


def default_backend_name() -> str:
    return get_kernel().BACKEND_NAME
