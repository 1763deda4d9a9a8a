"""
Document layout analysis toolkit: PAGE-XML handling, proposal geometry,
baseline/text-line conversion, inference post-processing and evaluation.
"""

__version__ = "1.0.0"
