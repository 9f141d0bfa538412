"""Middlebox-delegated TLS: proxy-certificate handshake, maTLS baseline, cost model."""

from .counters import CostLedger, OpCounter
from .protocol import ProtocolAbort, SessionConfig

__version__ = "0.1.0"

__all__ = ["CostLedger", "OpCounter", "ProtocolAbort", "SessionConfig", "__version__"]
