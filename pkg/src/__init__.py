"""
Ancilla-Assisted Bell Measurement Optimizer - Source Package
"""

__version__ = "1.0.0"
