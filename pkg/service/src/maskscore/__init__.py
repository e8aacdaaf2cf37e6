"""Fill-mask scoring over pretrained masked language models, as a service.

One model per process. The HTTP surface speaks the version-1 fill-mask
wire format: POST /fill-mask with {"v": 1, "prompt": ..., "top_n": ...},
GET /health for readiness, the model label, and the mask placeholder.
"""

__version__ = "0.1.0"

from .scoring import MaskScorer, PromptError

__all__ = ["MaskScorer", "PromptError", "__version__"]
