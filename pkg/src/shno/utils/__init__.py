"""Utility functions and helpers."""

from shno.utils.paths import atomic_write_bytes, atomic_write_text
from shno.utils.rng import spawn_rng
from shno.utils.tracer import Tracer, tracer

__all__ = [
    "atomic_write_bytes",
    "atomic_write_text",
    "spawn_rng",
    "Tracer",
    "tracer",
]
