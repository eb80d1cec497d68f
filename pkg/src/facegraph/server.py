"""
FaceGraph tool server

Exposes the cleaning, aggregation, evaluation, sweep and synthetic-data
stages as tools over stdio. Tools live in the tools/ sub-package and
register themselves with face_mcp when imported.
"""

from .clients import face_mcp

# Import all tools to register them with face_mcp
from . import tools  # noqa: F401


def run() -> None:
    """Run the FaceGraph tool server on stdio."""
    face_mcp.run("stdio")
