"""Extractive, concept-guided abstractive and ensemble summarisation of inpatient notes."""

__version__ = "0.1.0"
