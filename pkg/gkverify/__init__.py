"""gk-verify: numerical verification of generalized Kähler spaces and geodesic mappings."""

__version__ = "1.0.0"
