"""
APVLM Command Line

Production entry point: `python run.py <command> ...` (run, render, replay,
replay-transcript, report, compare).
"""

from src.controllers.cli_controller import cli

if __name__ == '__main__':
    cli()
