"""Corpus-audit toolkit: dialect density scoring, community-informed silver
labels, and bias statistics for emotion classifiers."""

__version__ = "0.1.0"

from .tagging import TAGGER_VERSION  # noqa: F401
