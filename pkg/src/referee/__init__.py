"""Desk-scale referee platform for latency-gated model competitions.

Subpackages: ``graph`` (portable IR, validation, interpreter), ``opt``
(compile-stage optimizer passes), ``device`` (latency simulator),
``metrics`` (per-track scoring), ``core`` (submission lifecycle, store,
leaderboard), ``api`` (HTTP facade), ``cli`` (operator tool).
"""

__version__ = "0.1.0"
