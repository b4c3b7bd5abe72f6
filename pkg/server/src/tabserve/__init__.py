"""Fit/predict regression server speaking a newline-delimited JSON protocol."""

from .regressors import MODES, EchoRegressor, RidgeRegressor, make_regressor
from .server import ServerState, handle_line, serve_stdio, serve_tcp

__version__ = "0.1.0"

__all__ = [
    "MODES",
    "EchoRegressor",
    "RidgeRegressor",
    "ServerState",
    "handle_line",
    "make_regressor",
    "serve_stdio",
    "serve_tcp",
]
