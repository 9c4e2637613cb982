"""
Mock VLM Controller

Chat-completions compatible route answering from the app's MockScript.
"""

from flask import Blueprint, current_app, jsonify, request

from src.logic.mock_endpoint_logic import MockEndpointLogic

mock_vlm_bp = Blueprint('mock_vlm', __name__)


@mock_vlm_bp.route('/v1/chat/completions', methods=['POST'])
def chat_completions():
    """Serve the next scripted reply."""
    body = request.get_json(silent=True)
    error = MockEndpointLogic.validate_request(body)
    if error:
        return jsonify(MockEndpointLogic.error_payload(400, error)), 400

    script = current_app.config['MOCK_SCRIPT']
    reply = script.next_reply(body)
    current_app.logger.debug("Mock completion: %d images, reply %r",
                             MockEndpointLogic.count_images(body), reply)
    if isinstance(reply, int):
        return jsonify(MockEndpointLogic.error_payload(reply, 'scripted failure')), reply
    return jsonify(MockEndpointLogic.completion_payload(body['model'], reply))
