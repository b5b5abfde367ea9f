"""Reference HTTP scorer/generator service for the figcap pipeline."""

from .app import ServiceConfig, create_app, serve
from .model import NgramSequenceModel

__all__ = ["NgramSequenceModel", "ServiceConfig", "create_app", "serve"]
