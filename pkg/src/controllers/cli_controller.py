"""
CLI Controller

Command-line entry point: run experiments, render overlays, replay
episode logs and transcripts, emit reports and run the fixed-views
comparison. Commands parse flags, call logic and map errors to exit codes.
"""

import logging
from pathlib import Path

import click

import config
from src import configure_logging
from src.logic.episode_log_logic import EpisodeLogLogic
from src.logic.experiment_logic import ExperimentLogic
from src.logic.geometry_logic import GeometryLogic
from src.logic.grid_logic import GridLogic
from src.logic.metrics_logic import MetricsLogic, REPORT_NOTES
from src.logic.scene_logic import SceneLogic
from src.models.main import Pose, Vec3
from src.utils.errors import ConfigError, EndpointUnavailable, LogCorrupt, SceneError
from src.utils.helpers import parse_pose_flag

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SCENE = 3
EXIT_UNAVAILABLE = 4
EXIT_CORRUPT_LOG = 5


def _fail(message: str, code: int):
    click.echo(f"Error: {message}", err=True)
    click.get_current_context().exit(code)


@click.group()
@click.option('--log-level', default=config.LOG_LEVEL, show_default=True,
              type=click.Choice(['DEBUG', 'INFO', 'WARNING', 'ERROR'], case_sensitive=False),
              help='Logging verbosity.')
def cli(log_level):
    """Tabletop active-perception simulator and evaluation harness."""
    configure_logging(log_level)


@cli.command()
@click.option('--config', 'config_path', required=True, type=click.Path(dir_okay=False),
              help='Experiment JSON file.')
@click.option('--out', 'out_dir', required=True, type=click.Path(file_okay=False),
              help='Output directory for logs, metrics and reports.')
def run(config_path, out_dir):
    """Run an experiment sweep and write logs, metrics and reports."""
    success, cfg, error = ExperimentLogic.load_experiment(config_path)
    if not success:
        _fail(error, EXIT_CONFIG)
    try:
        outcome = ExperimentLogic.run_experiment(cfg, out_dir)
    except SceneError as exc:
        _fail(str(exc), EXIT_SCENE)
    except ConfigError as exc:
        _fail(str(exc), EXIT_CONFIG)
    except EndpointUnavailable as exc:
        _fail(str(exc), EXIT_UNAVAILABLE)

    ExperimentLogic.write_outputs(outcome, out_dir)
    click.echo(MetricsLogic.emit_report(outcome.cells, 'markdown', ExperimentLogic.report_notes(cfg)))
    click.echo(f"{len(outcome.trials)} episodes written to {Path(out_dir) / 'episodes'}")


@cli.command()
@click.option('--scene', 'scene_path', required=True, type=click.Path(dir_okay=False),
              help='Scene JSON file.')
@click.option('--pose', 'pose_str', required=True, help='Camera pose "x,y,z,rx,ry" (meters, degrees).')
@click.option('--out', 'out_path', required=True, type=click.Path(dir_okay=False), help='PNG file to write.')
def render(scene_path, pose_str, out_path):
    """Render a scene with the grid overlay; the overlay alone goes to a sibling SVG."""
    ok, values, error = parse_pose_flag(pose_str)
    if not ok:
        _fail(error, EXIT_CONFIG)
    success, scene, error = SceneLogic.load_scene(scene_path)
    if not success:
        _fail(error, EXIT_SCENE)

    x, y, z, rot_x, rot_y = values
    pose = Pose(Vec3(x, y, z), GeometryLogic.rotation_about_base(rot_x, rot_y))
    k = scene.intrinsics
    overlay = GridLogic.project_grid(scene.grid, k, pose)
    image = SceneLogic.render(scene, pose, k, overlay)

    png_path = SceneLogic.save_png(image, out_path)
    svg_path = png_path.with_suffix('.svg')
    svg_path.write_text(SceneLogic.export_overlay_svg(overlay, k.width, k.height), encoding='utf-8')
    click.echo(f"{png_path} ({len(overlay.visible_vertices)} grid vertices in view), {svg_path}")


@cli.command()
@click.argument('log_path', type=click.Path(dir_okay=False))
def replay(log_path):
    """Print an episode narrative and re-check the log invariants."""
    try:
        log = EpisodeLogLogic.verify_log(log_path)
    except LogCorrupt as exc:
        _fail(f"corrupt episode log, invariant '{exc.invariant}' failed: {exc}", EXIT_CORRUPT_LOG)
    click.echo(EpisodeLogLogic.describe(log))
    if log.truncated:
        click.echo("Warning: the log has no result line; the run was interrupted.", err=True)


@cli.command('replay-transcript')
@click.argument('transcript_path', type=click.Path(dir_okay=False))
def replay_transcript(transcript_path):
    """Re-parse every reply in a VLM transcript and compare with the recorded parse."""
    from src.logic.vlm_logic import replay_transcript as replay_file

    try:
        results = replay_file(transcript_path)
    except (OSError, ValueError, KeyError) as exc:
        _fail(f"cannot replay {transcript_path}: {exc}", EXIT_CORRUPT_LOG)
    mismatches = [n for n, r in enumerate(results) if not r['match']]
    click.echo(f"{len(results)} exchanges replayed, {len(mismatches)} mismatches")
    if mismatches:
        _fail(f"parses differ at exchanges {mismatches}", EXIT_CORRUPT_LOG)


@cli.command()
@click.option('--results', 'results_path', required=True, type=click.Path(dir_okay=False),
              help='metrics.json written by run.')
@click.option('--format', 'fmt', default='markdown', show_default=True,
              type=click.Choice(['markdown', 'csv']), help='Report format.')
def report(results_path, fmt):
    """Render a report from a metrics.json file."""
    success, cells, error = ExperimentLogic.read_metrics(results_path)
    if not success:
        _fail(error, EXIT_CONFIG)
    click.echo(MetricsLogic.emit_report(cells, fmt, REPORT_NOTES), nl=False)


@cli.command()
@click.option('--config', 'config_path', required=True, type=click.Path(dir_okay=False),
              help='Experiment JSON file.')
@click.option('--out', 'out_dir', default=None, type=click.Path(file_okay=False),
              help='Optional directory for the episode logs.')
def compare(config_path, out_dir):
    """Fixed-views baseline against the active 3Dx agent."""
    success, cfg, error = ExperimentLogic.load_experiment(config_path)
    if not success:
        _fail(error, EXIT_CONFIG)
    try:
        rows = ExperimentLogic.run_comparison(cfg, out_dir)
    except SceneError as exc:
        _fail(str(exc), EXIT_SCENE)
    except EndpointUnavailable as exc:
        _fail(str(exc), EXIT_UNAVAILABLE)

    text = MetricsLogic.emit_comparison(rows)
    if out_dir is not None:
        path = Path(out_dir) / 'comparison.md'
        path.write_text(text, encoding='utf-8')
        logger.info("Wrote %s", path)
    click.echo(text, nl=False)
