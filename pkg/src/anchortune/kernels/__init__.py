"""Hot kernels behind the convolution ops, with backend selection at import.

The compiled Cython extension is preferred when present; set
``ANCHORTUNE_KERNELS=numpy`` (or ``cython``) to force a backend. Both
backends produce bit-identical results.
"""

import os

from . import conv_numpy

_requested = os.environ.get("ANCHORTUNE_KERNELS", "auto").lower()

if _requested not in ("auto", "numpy", "cython"):
    raise ValueError(
        f"ANCHORTUNE_KERNELS must be 'auto', 'numpy' or 'cython', got {_requested!r}"
    )

if _requested == "numpy":
    _impl = conv_numpy
    BACKEND = "numpy"
else:
    try:
        from . import _convcy as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        if _requested == "cython":
            raise ImportError(
                "compiled kernels requested via ANCHORTUNE_KERNELS=cython but "
                "anchortune.kernels._convcy is not built; run "
                "`python setup.py build_ext --inplace` or reinstall"
            ) from None
        _impl = conv_numpy
        BACKEND = "numpy"

im2col = _impl.im2col
col2im = _impl.col2im


def get_backend(name):
    """Return the (im2col, col2im) pair for an explicit backend name."""
    if name == "numpy":
        return conv_numpy.im2col, conv_numpy.col2im
    if name == "cython":
        from . import _convcy

        return _convcy.im2col, _convcy.col2im
    raise ValueError(f"unknown kernel backend {name!r}")
