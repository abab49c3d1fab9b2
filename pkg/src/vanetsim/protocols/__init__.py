from .acr import AcrNode
from .aodv import AodvNode
from .base import DataPacket, NodeServices, RoutingProtocol
from .dsdv import DsdvNode
from .rsu import RsuAddress, RsuStation

PROTOCOLS = {
    "acr": AcrNode,
    "aodv": AodvNode,
    "dsdv": DsdvNode,
}

__all__ = [
    "AcrNode",
    "AodvNode",
    "DsdvNode",
    "DataPacket",
    "NodeServices",
    "RoutingProtocol",
    "RsuAddress",
    "RsuStation",
    "PROTOCOLS",
]
