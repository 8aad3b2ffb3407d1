"""FastAPI routers for the adaptive DSMC simulator API."""

__all__ = []
