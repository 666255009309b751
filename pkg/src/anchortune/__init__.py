"""anchortune: a desk-scale lab for person-aware tuning of a style-modulated
mask-aware inpainting network on synthetic faces."""

__version__ = "0.1.0"

from .autograd import Tensor, no_grad  # noqa: F401
