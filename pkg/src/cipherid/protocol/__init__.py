"""Client/server exchange for encrypted identification.

``client`` and ``server`` are kept in separate modules; only the client
imports decryption.
"""

from .client import client_prepare, client_validate
from .messages import IdentifyRequest, IdentifyResponse, ValidationVerdict
from .server import ServerConfig, serve_directory, server_identify, solve_encrypted


def run_local(data, task, eps, params, config: ServerConfig = ServerConfig(), trace=None):
    """Run both roles in one process. Returns ``(request, response, verdict)``."""
    req = client_prepare(data, task, eps, params)
    resp = server_identify(req, config, trace=trace)
    return req, resp, client_validate(resp, q=config.q)


__all__ = [
    "IdentifyRequest",
    "IdentifyResponse",
    "ServerConfig",
    "ValidationVerdict",
    "client_prepare",
    "client_validate",
    "run_local",
    "serve_directory",
    "server_identify",
    "solve_encrypted",
]
