"""HTTP layer: a FastAPI app over one Pipeline instance."""

from .app import create_app

__all__ = ["create_app"]
