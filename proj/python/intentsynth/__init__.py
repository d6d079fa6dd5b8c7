"""Synthetic German intent corpora: generation, curation, training and evaluation."""

from ._intentsynth import *  # noqa: F401,F403
from ._intentsynth import __doc__  # noqa: F401
