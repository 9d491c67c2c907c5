"""Seed-free synthesis of mathematical reasoning data.

Structured constraint-graph blueprints are evolved by an adversarial
proposer/critic/moderator roundtable, instantiated into (question, answer)
pairs, judge-verified, and audited with similarity/quality/difficulty metrics.
"""

__version__ = "0.1.0"
