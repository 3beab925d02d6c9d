"""Dynamic-programming solver for minimum-time and discounted control on SU(2)."""

__version__ = "0.1.0"
