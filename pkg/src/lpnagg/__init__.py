"""LPN-based secure aggregation: KAHE, committee decryptor, CRT, planning and analysis."""

__version__ = "0.1.0"
