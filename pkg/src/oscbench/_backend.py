"""Backend selection: compiled extension when available, numpy fallback otherwise.

Set OSCBENCH_BACKEND=python to force the fallback (used by the benchmark and
the backend-equivalence tests).
"""
from __future__ import annotations

import os

from . import _kernels_py

try:
    from . import _kernels  # compiled extension
except ImportError:  # pragma: no cover - depends on build environment
    _kernels = None

COMPILED_AVAILABLE = _kernels is not None

if os.environ.get("OSCBENCH_BACKEND", "").lower() == "python" or _kernels is None:
    _active = _kernels_py
else:
    _active = _kernels


def backend_name() -> str:
    return "compiled" if _active is _kernels and _kernels is not None else "python"


def get_backend(name: str | None = None):
    """Module implementing pair_quadrature; name in {None, 'compiled', 'python'}."""
    if name in (None, ""):
        return _active
    if name == "python":
        return _kernels_py
    if name == "compiled":
        if _kernels is None:
            raise RuntimeError("compiled kernel extension is not available")
        return _kernels
    raise ValueError(f"unknown backend {name!r}")
