"""
dsdkit - residential end-use carbon intensity decomposition
Euler-integrated shift/slack decomposition of kgCO2-per-household changes
"""

__version__ = "1.0.0"

__all__ = ["__version__"]
