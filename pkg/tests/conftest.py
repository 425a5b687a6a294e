"""Shared helpers: brute-force oracles and small builders used across tests."""

from __future__ import annotations

import random
from typing import Tuple

import pytest

from coedit.model import (
    Delete,
    ExternalOp,
    Insert,
    TimestampedOp,
    VectorClock,
    apply_external,
)
from coedit.ot import transform


def stamp(op: ExternalOp, origin: int, seq: int, others: dict = None) -> TimestampedOp:
    """TimestampedOp with clock {origin: seq} plus any extra entries."""
    entries = dict(others or {})
    entries[origin] = seq
    return TimestampedOp(op, origin, seq, VectorClock(entries))


def both_orders(state: str, a: ExternalOp, b: ExternalOp, a_site: int = 1, b_site: int = 2) -> Tuple[str, str]:
    """Final states of the two execution orders of a concurrent pair.

    Order 1: a then T(b, a); order 2: b then T(a, b). Equality of the two
    results is exactly the TP1 property; this is the brute-force oracle for
    the [DERIVED] transformation examples.
    """
    one = apply_external(apply_external(state, a), transform(b, a, b_site, a_site))
    two = apply_external(apply_external(state, b), transform(a, b, a_site, b_site))
    return one, two


def random_op(rng: random.Random, length: int, allow_delete: bool = True) -> ExternalOp:
    """A position-valid op for a document of the given length."""
    if allow_delete and length > 0 and rng.random() < 0.4:
        return Delete(rng.randrange(length))
    return Insert(rng.randint(0, length), rng.choice("abcxyz"))


@pytest.fixture
def rng():
    return random.Random(0)
