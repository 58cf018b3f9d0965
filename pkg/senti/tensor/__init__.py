from . import functional
from .functional import DEFAULT_EPS, ChannelStats, adain, channel_stats, global_avg_pool
from .gradcheck import grad_check
from .rng import RngState
from .tensor import Graph, Tensor, as_tensor, backward, grad

__all__ = [
    "DEFAULT_EPS",
    "ChannelStats",
    "Graph",
    "RngState",
    "Tensor",
    "adain",
    "as_tensor",
    "backward",
    "channel_stats",
    "functional",
    "global_avg_pool",
    "grad",
    "grad_check",
]
