"""HTTP scoring service: turns token vectors into images and scores them for
aesthetics and prompt alignment."""

from .app import create_app
from .config import ServiceConfig

__version__ = "0.1.0"
