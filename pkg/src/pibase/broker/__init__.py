"""Firebase-style backend: auth, JSON tree DB with triggers, storage, topics."""

from pibase.broker.core import BrokerCore
from pibase.broker.client import APIError, BrokerClient, BrokerUnreachable
from pibase.broker.server import BrokerHTTPServer
from pibase.broker.topics import Message
from pibase.broker.triggers import DEFAULT_INTRUSION_RULE, TriggerRule

__all__ = [
    "APIError",
    "BrokerClient",
    "BrokerCore",
    "BrokerHTTPServer",
    "BrokerUnreachable",
    "DEFAULT_INTRUSION_RULE",
    "Message",
    "TriggerRule",
]
