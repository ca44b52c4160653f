"""Two alternating urns, their marked Galton-Watson embedding, and the limit theory of the colour counts."""

from .model import ReplacementLaw, load_law, mean_matrix
from .spectral import decompose

__all__ = ["ReplacementLaw", "load_law", "mean_matrix", "decompose"]
__version__ = "0.1.0"
