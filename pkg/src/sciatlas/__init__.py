"""sciatlas: interinstitutional science-collaboration atlas pipeline.

Ingests scholarly works from OpenAlex (or an offline snapshot), computes
per-discipline collaboration structure over four multi-year periods, and
emits world maps, a five-party matrix diagram, circular dendrograms, and
production tables.
"""

__version__ = "0.1.0"

from .corpus import PERIODS, Corpus, Institution, Period, Work, assign_period
from .metrics import EU27_DEFAULT, PARTIES, distance, top_k
from .taxonomy import DisciplineSpec, expand_discipline, load_table1_roots

__all__ = [
    "PERIODS", "Corpus", "Institution", "Period", "Work", "assign_period",
    "EU27_DEFAULT", "PARTIES", "distance", "top_k",
    "DisciplineSpec", "expand_discipline", "load_table1_roots",
    "__version__",
]
