"""
APVLM application package

Provides the application factory (create_app) for the local chat-completions
endpoint and configure_logging for the command-line tools.
"""

from __future__ import annotations

import logging
from typing import Optional

from flask import Flask

import config

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'


def configure_logging(level: Optional[str] = None) -> None:
    """Install one stream handler on the root logger.

    Args:
        level (str): Level name, default config.LOG_LEVEL
    """
    name = (level or config.LOG_LEVEL).upper()
    numeric = logging.getLevelName(name)
    if not isinstance(numeric, int):
        raise ValueError(f"Unknown log level '{level}'")
    root = logging.getLogger()
    for handler in list(root.handlers):
        if getattr(handler, '_apvlm', False):
            root.removeHandler(handler)
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    handler._apvlm = True
    root.addHandler(handler)
    root.setLevel(numeric)


def create_app(script=None) -> Flask:
    """Application factory for the mock chat-completions endpoint.

    Args:
        script (MockScript): Scripted replies, an empty script when omitted

    Returns:
        Flask: Configured Flask application instance.
    """
    from src.logic.mock_endpoint_logic import MockScript

    app = Flask(__name__, template_folder='templates')
    app.config.update(
        MOCK_SCRIPT=script if script is not None else MockScript(),
        JSON_SORT_KEYS=False,
    )

    # Register blueprints (lazy imports to avoid circular dependencies)
    from src.controllers.main import main_bp
    from src.controllers.mock_vlm_controller import mock_vlm_bp

    app.register_blueprint(main_bp)
    app.register_blueprint(mock_vlm_bp)
    return app


__all__ = [
    'configure_logging',
    'create_app',
]
