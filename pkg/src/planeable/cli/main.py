"""
Entry point of the `planeable` command.

The commands (`reconstruct`, `online`, `evaluate`, `synth`) exist in two front
ends over the same functions in `commands.core`: a Typer/Rich one that renders
plane tables and stage timings, and an argparse one that prints plain text. The
Rich front end needs the `cli` extra; without it, with `--bare` on the command
line, or with `PLANEABLE_BARE` set, the argparse front end runs.
"""

from os import environ
from sys import argv

BARE_FLAG = "--bare"
BARE_ENV = "PLANEABLE_BARE"


def _wants_bare() -> bool:
    if BARE_FLAG in argv:
        argv.remove(BARE_FLAG)
        return True
    return environ.get(BARE_ENV, "") not in ("", "0")


def app():
    """Run the plane reconstruction CLI in the Rich or the plain front end."""
    if not _wants_bare():
        try:
            from .rich_cli import app as rich_app
        except ImportError:
            pass
        else:
            rich_app()
            return

    from .bare_cli import run_bare

    run_bare()


if __name__ == "__main__":
    app()
