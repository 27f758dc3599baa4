"""Low-rank tensor recovery in Tucker and tensor-train formats."""

__version__ = "0.1.0"
