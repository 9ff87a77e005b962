"""Logging setup: one rich handler on stderr, configured by the CLI."""

import logging

from rich.console import Console
from rich.logging import RichHandler

_HANDLER_NAME = "pfode-rich"


def configure_logging(verbose: bool = False, quiet: bool = False) -> None:
    """Install (or replace) the package log handler."""
    if quiet:
        level = logging.WARNING
    elif verbose:
        level = logging.DEBUG
    else:
        level = logging.INFO

    root = logging.getLogger("pfode_lab")
    for handler in list(root.handlers):
        if handler.get_name() == _HANDLER_NAME:
            root.removeHandler(handler)

    handler = RichHandler(console=Console(stderr=True), show_path=False, rich_tracebacks=False)
    handler.set_name(_HANDLER_NAME)
    handler.setFormatter(logging.Formatter("%(message)s"))
    root.addHandler(handler)
    root.setLevel(level)
    root.propagate = False
