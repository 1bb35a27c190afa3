"""Services package for TVPath."""
