"""Exact-arithmetic toolkit for unipotent connections and the finiteness criteria built on them."""

__version__ = "0.1.0"
