"""Natural-language camera trajectory generation.

Submodules are imported explicitly (``camtraj.geometry``, ``camtraj.gpt``,
...) so that lightweight consumers do not pay for the torch import.
"""

__version__ = "0.1.0"
