"""Entry point for the waring command-line tool."""

import sys


def main() -> int:
    """Run the CLI on sys.argv and return its exit code."""
    from waring.cli import main as cli_main

    return cli_main(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
