"""Utilities package for TVPath."""
