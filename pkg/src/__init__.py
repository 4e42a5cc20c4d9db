"""
Decision-Focused Learning Toolkit - Source Code Package
"""

__version__ = "0.1.0"
