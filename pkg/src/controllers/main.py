"""
Main Controller

Health route for the local endpoint.
"""

from flask import Blueprint, current_app, jsonify

import config

main_bp = Blueprint('main', __name__)


@main_bp.route('/')
def health():
    script = current_app.config['MOCK_SCRIPT']
    return jsonify({'app': config.APPNAME, 'status': 'ok', 'pending_replies': script.pending})
