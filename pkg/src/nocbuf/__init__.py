"""Common vs distributed input buffering in a 4x4 network-on-chip router."""

__version__ = "0.1.0"
