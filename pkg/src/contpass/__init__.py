"""Lambda-lifting and CPS conversion laboratory for a small imperative language."""

__version__ = "0.1.0"
