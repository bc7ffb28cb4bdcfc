"""Diverse sensing and internal feedback lab."""
