"""Utility functions for the FaceGraph tools."""

import asyncio
import logging
from functools import wraps
from typing import Any, Dict

from .errors import FaceGraphError

logger = logging.getLogger(__name__)


def build_params(**kwargs) -> Dict[str, Any]:
    """
    Build a parameters dictionary excluding None values.

    Lets optional tool arguments fall through to RunConfig defaults and
    environment fallbacks instead of overriding them with None.

    Example:
        >>> build_params(theta=0.8, jobs=None)
        {'theta': 0.8}
    """
    return {k: v for k, v in kwargs.items() if v is not None}


def handle_tool_errors(func):
    """
    Turn pipeline failures into "Error: ..." strings for tool callers.

    asyncio.CancelledError is re-raised immediately so an interrupted tool
    call stops instead of reporting an error string.
    """

    @wraps(func)
    async def wrapper(*args, **kwargs):
        try:
            return await func(*args, **kwargs)
        except asyncio.CancelledError:
            raise
        except FaceGraphError as e:
            logger.debug("%s failed: %s", func.__name__, e)
            return f"Error: {type(e).__name__}: {e}"
        except (OSError, ValueError) as e:
            return f"Error: {e}"

    return wrapper
