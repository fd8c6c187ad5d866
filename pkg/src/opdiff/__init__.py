"""Operator-difference time stepping for second-order evolution equations."""
__version__ = "0.1.0"
