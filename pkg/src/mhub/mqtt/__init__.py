"""MQTT 3.1.1: packet codec, embedded broker, and a small client."""
from __future__ import annotations

from .broker import Broker, BrokerConfig, start_broker
from .client import Message, MqttClient, MqttError
from .codec import ProtocolError
from .matching import FilterError, topic_match, validate_filter, validate_topic

__all__ = [
    "Broker", "BrokerConfig", "start_broker",
    "Message", "MqttClient", "MqttError",
    "ProtocolError",
    "FilterError", "topic_match", "validate_filter", "validate_topic",
]
