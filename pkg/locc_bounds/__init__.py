"""locc-bounds - LOCC state discrimination bounds"""

__version__ = "1.0.0"
