"""Target-guided bidirectional search: tree (RFF-T) and accumulation (RFF-G) engines."""

__version__ = "0.1.0"
