"""
Utility functions for wavepinn
Config files, CSV output, expression parsing and deterministic parallel helpers
"""

from .csv_serialization import clean_frame, clean_value, format_float, write_csv, write_text
from .parallel import chunk_slices, map_ordered, tree_sum

__all__ = [
    'clean_frame',
    'clean_value',
    'format_float',
    'write_csv',
    'write_text',
    'chunk_slices',
    'map_ordered',
    'tree_sum',
]
