"""Module entry point so ``python -m strav`` behaves like the ``strav`` script."""

from .cli import entry

entry()
