"""Shadow removal with a channel-attention transformer and shadow-interaction attention."""

__version__ = "0.1.0"
