"""Simulated spacecraft console driven by a language-model agent."""

__version__ = "0.1.0"
