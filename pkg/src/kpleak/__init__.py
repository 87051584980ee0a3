"""Power-trace laboratory for balanced Montgomery-ladder ECC coprocessors."""

__version__ = "0.1.0"
