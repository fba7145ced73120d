"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise the numpy
fallback. Set ``RETINEXLCE_BACKEND=python`` to force the fallback, or
``native`` to make a missing extension an error.
"""

import os

from . import _kernels_py

_requested = os.environ.get("RETINEXLCE_BACKEND", "auto").lower()

try:
    from . import _native
except ImportError:
    _native = None

if _requested == "native" and _native is None:
    raise ImportError("RETINEXLCE_BACKEND=native but the compiled extension is not built")

BACKENDS = {"python": _kernels_py}
if _native is not None:
    BACKENDS["native"] = _native

_active = _kernels_py if _requested == "python" or _native is None else _native


def backend_name() -> str:
    return "native" if _active is _native and _native is not None else "python"


def use_backend(name: str) -> None:
    """Switch the active kernel set at runtime (``"native"`` or ``"python"``)."""
    global _active
    if name not in BACKENDS:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}")
    _active = BACKENDS[name]


def im2col3x3(x):
    return _active.im2col3x3(x)


def col2im3x3(cols, h, w):
    return _active.col2im3x3(cols, h, w)


def curve_forward(y0, alphas):
    return _active.curve_forward(y0, alphas)


def curve_backward(ys, alphas, gout):
    return _active.curve_backward(ys, alphas, gout)
