"""Eigenvalue features of EEG topomap stacks for correct/incorrect answer classification."""

__version__ = "0.1.0"
