"""Simulated public-key encryption with secure key leasing.

Toy-parameter implementations of the building blocks (sparse quantum
register simulator, garbled circuits, LWE-style PKE, one-key CPFE), the
key-leasing schemes built from them, ABE with key leasing, and Monte-Carlo
security games. Nothing here is secure; it exists to reproduce the
mechanics and the attack probabilities exactly.
"""

__version__ = "0.1.0"
