from .config import ServiceConfig
from .app import create_app, ServiceState

__all__ = ["ServiceConfig", "create_app", "ServiceState"]
