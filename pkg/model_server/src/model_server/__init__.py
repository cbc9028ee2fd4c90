"""Reference stdio server for the line-delimited model evaluation protocol."""

from .scoring import FIXTURES, linear, trig3
from .server import ServerConfig, serve

__all__ = ["FIXTURES", "ServerConfig", "linear", "serve", "trig3"]
