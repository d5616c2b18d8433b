"""Entry point for python -m cdp."""

from cdp.cli import main

if __name__ == "__main__":
    main()
