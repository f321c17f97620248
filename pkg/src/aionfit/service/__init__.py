"""HTTP service wrapping the fitting core, plus the client used by the CLI."""

from .app import app, create_app
from .client import ServiceClient, ServiceError

__all__ = ["app", "create_app", "ServiceClient", "ServiceError"]
