"""Pretrained speech recognition behind a line-delimited JSON stdio protocol."""

from .models import BridgeConfig, ctc_prefix_beam_search, load_audio, load_model
from .protocol import HANDSHAKE_ID, serve

__version__ = "0.1.0"

__all__ = [
    "BridgeConfig", "load_model", "load_audio", "ctc_prefix_beam_search",
    "serve", "HANDSHAKE_ID",
]
