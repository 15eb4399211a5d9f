"""Dense float64 tensors and reverse-mode differentiation over static graphs."""

from .engine import backward, evaluate, finite_difference_gradient, forward, vjp
from .graph import Network, NetworkBuilder, Node
from .ops import OPS, CompositeDef, OpDef, op_catalog

__all__ = [
    "OPS",
    "CompositeDef",
    "Network",
    "NetworkBuilder",
    "Node",
    "OpDef",
    "backward",
    "evaluate",
    "finite_difference_gradient",
    "forward",
    "op_catalog",
    "vjp",
]
