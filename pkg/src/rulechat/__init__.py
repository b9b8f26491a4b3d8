"""Conversational interpreter for natural-language eligibility rules.

The package reads a short regulatory snippet, decides whether a user's
question can be answered yet, and when it cannot, asks the follow-up
question that resolves the missing condition.  Sub-modules cover rule
parsing, decision classification, follow-up generation, scenario
entailment, the dialog pipeline, corpus tooling, evaluation metrics,
and an HTTP service.
"""

__version__ = "0.1.0"

__all__ = ["__version__"]
