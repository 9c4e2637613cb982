"""Local chat-completions endpoint."""

import pytest

from src import configure_logging, create_app
from src.logic.mock_endpoint_logic import DEFAULT_REPLY, MockEndpointLogic, MockScript

REQUEST = {
    'model': 'gpt-4o',
    'messages': [
        {'role': 'system', 'content': 'system'},
        {'role': 'user', 'content': [
            {'type': 'text', 'text': 'look'},
            {'type': 'image_url', 'image_url': {'url': 'data:image/png;base64,AAAA'}},
        ]},
    ],
}


@pytest.fixture
def script():
    return MockScript()


@pytest.fixture
def client(script):
    app = create_app(script)
    app.config['TESTING'] = True
    return app.test_client()


def test_health_reports_pending_replies(client, script):
    script.push('one', 'two')
    response = client.get('/')
    assert response.status_code == 200
    assert response.get_json() == {'app': 'APVLM', 'status': 'ok', 'pending_replies': 2}


def test_scripted_replies_then_default(client, script):
    script.push('first')
    first = client.post('/v1/chat/completions', json=REQUEST).get_json()
    assert first['choices'][0]['message']['content'] == 'first'
    assert first['model'] == 'gpt-4o'
    second = client.post('/v1/chat/completions', json=REQUEST).get_json()
    assert second['choices'][0]['message']['content'] == DEFAULT_REPLY
    assert len(script.requests) == 2


def test_scripted_status(client, script):
    script.push(429)
    response = client.post('/v1/chat/completions', json=REQUEST)
    assert response.status_code == 429
    assert response.get_json()['error']['code'] == 429


@pytest.mark.parametrize('body', [
    {'messages': REQUEST['messages']},
    {'model': 'gpt-4o', 'messages': []},
    {'model': 'gpt-4o', 'messages': [{'role': 'user'}]},
])
def test_invalid_requests(client, script, body):
    response = client.post('/v1/chat/completions', json=body)
    assert response.status_code == 400
    assert script.requests == []


def test_count_images():
    assert MockEndpointLogic.count_images(REQUEST) == 1


def test_configure_logging_rejects_unknown_levels():
    configure_logging('WARNING')
    with pytest.raises(ValueError):
        configure_logging('LOUD')
