"""Wireless overlay embedding: placement, multicast routing and SINR-aware TDMA scheduling."""

__version__ = "0.1.0"
