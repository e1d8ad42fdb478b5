"""Multi-user CSI feedback over a learned analog uplink.

Synthetic correlated channel generation, a from-scratch numpy transformer
codec with per-user encoders and a joint residual cross-attention decoder,
an AWGN feedback link trained end to end, a digital (quantize + bit pipe)
comparator, and a sweep/reporting harness.
"""

from .backend import active_backend, set_backend
from .channel import ChannelConfig, DegenerateSampleError, PathSet
from .codec import CodecConfig, ModelParams, count_parameters
from .evaluate import nmse
from .link import LinkConfig
from .sscc import QuantizerConfig, SsccLinkConfig
from .training import TrainConfig, TrainState, TrainingDiverged

__version__ = "0.1.0"

__all__ = [
    "ChannelConfig", "CodecConfig", "DegenerateSampleError", "LinkConfig",
    "ModelParams", "PathSet", "QuantizerConfig", "SsccLinkConfig",
    "TrainConfig", "TrainState", "TrainingDiverged", "active_backend",
    "count_parameters", "nmse", "set_backend", "__version__",
]
