from .async_runner import AsyncRunner

__all__ = [
    "AsyncRunner",
]
