"""Exact and numerical invariants of toric hyperkahler quotients and their Taub-NUT deformations."""

from __future__ import annotations

__version__ = "0.1.0"
