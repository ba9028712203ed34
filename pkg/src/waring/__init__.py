"""Waring - Generalized Waring distributions and point processes."""

__version__ = "1.0.0"
__app_name__ = "Waring"
