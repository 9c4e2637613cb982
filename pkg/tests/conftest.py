"""Shared pytest fixtures."""

import sys
import threading
from pathlib import Path
from typing import NamedTuple

import numpy as np
import pytest
from click.testing import CliRunner
from werkzeug.serving import make_server

ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from src import create_app  # noqa: E402
from src.logic.grid_logic import GridLogic  # noqa: E402
from src.logic.mock_endpoint_logic import MockScript  # noqa: E402
from src.logic.scene_logic import SceneLogic  # noqa: E402
from src.models.grid_model import GridDimensionality  # noqa: E402

SCENES_DIR = ROOT / 'scenes'
EXPERIMENTS_DIR = ROOT / 'experiments'


class MockServer(NamedTuple):
    base_url: str
    script: MockScript


def load_bundled(name):
    ok, scene, error = SceneLogic.load_scene(SCENES_DIR / f"{name}.json")
    assert ok, error
    return scene


@pytest.fixture
def grid3d():
    return GridLogic.default_spec()


@pytest.fixture
def grid2d():
    return GridLogic.default_spec(GridDimensionality.TWO_D)


@pytest.fixture
def intrinsics():
    return SceneLogic.default_intrinsics()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope='session')
def tin_scene():
    return load_bundled('scene1_upright_tin')


@pytest.fixture(scope='session')
def mug_scene():
    return load_bundled('scene2_inclined_mug')


@pytest.fixture(scope='session')
def cup_scene():
    return load_bundled('comparison_strawberry_cup')


@pytest.fixture
def mock_endpoint():
    """Scripted chat-completions endpoint on an ephemeral port."""
    script = MockScript()
    app = create_app(script)
    server = make_server('127.0.0.1', 0, app, threaded=True)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield MockServer(f"http://127.0.0.1:{server.server_port}/v1", script)
    server.shutdown()
    thread.join(timeout=5)


@pytest.fixture
def runner():
    return CliRunner()
