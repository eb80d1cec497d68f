"""
Tool modules for the FaceGraph server.

Each tool is registered with face_mcp when its module is imported.
"""

from . import cleaning
from . import evaluation
from . import synthetic

__all__ = ["cleaning", "evaluation", "synthetic"]
