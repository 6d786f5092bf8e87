"""Module entry point: python -m colonmap behaves like the colonmap binary."""

from .cli import main

if __name__ == "__main__":
    raise SystemExit(main())
