"""Cooperation thresholds for public goods games on uniform hypergraphs."""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source checkout
    __version__ = "0.1.0"
