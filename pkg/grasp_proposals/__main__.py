"""Entry point for the grasp-proposals command-line tool."""

from grasp_proposals.cli import app
from grasp_proposals.settings import setup_logging


def main():
    """Configure logging once, then dispatch to the CLI."""
    setup_logging()
    app()


if __name__ == "__main__":
    main()
