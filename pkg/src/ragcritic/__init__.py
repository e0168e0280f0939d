"""Structured critique of RAG trajectories: parsing, gated rewards, consensus
supervision, critique-gated refinement and intervention metrics."""

__version__ = "0.1.0"
