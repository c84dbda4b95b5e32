"""Random Euler-product model of zeta: fields, chaos mass, high points and their verification."""
__version__ = "0.1.0"
