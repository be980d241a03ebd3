"""Bounded brute-force ground truth by exhaustive instance enumeration.

Quantifies the definitions directly: enumerate every completion of a
visible instance whose hidden part lives over the visible active domain
plus `extra_values` fresh constants, filter by constraint satisfaction,
and test the query on each survivor.  Answers are exact whenever the
theory guarantees the bounded domain suffices, and exact for any "False"
because a concrete witness is in hand.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Optional, Tuple

from .core import (
    CName,
    ConstraintSet,
    Const,
    Fact,
    Instance,
    Schema,
    UCQ,
    active_domain,
    eval_ucq,
    satisfies,
    value_key,
)

EXACT = "ExactForClass"
BOUNDED = "BoundedOnly"


class SearchSpaceTooLarge(RuntimeError):
    def __init__(self, size: float):
        super().__init__(f"oracle search space of about {size:.3g} instances exceeds the ceiling")
        self.size = size


@dataclass(frozen=True)
class DomainBound:
    extra_values: int = 1
    max_facts_total: int = 12
    space_ceiling: float = 5e6


@dataclass(frozen=True)
class OracleAnswer:
    answer: bool
    exactness: str
    witness: Optional[Instance] = None

    def __bool__(self) -> bool:
        return self.answer


def fresh_constants(k: int) -> Tuple[Const, ...]:
    return tuple(Const(f"!w{i}") for i in range(k))


def named_constants(c: Optional[ConstraintSet] = None, q: Optional[UCQ] = None) -> Tuple[Const, ...]:
    """Constants mentioned by name in the constraints or the query: a hidden
    witness may have to use them even when the visible part does not."""
    names = set()
    if c is not None:
        for dep in c.dependencies:
            for atom in _constraint_atoms(dep):
                names.update(t.name for t in atom.args if isinstance(t, CName))
    if q is not None:
        for disjunct in q.disjuncts:
            for atom in disjunct.atoms:
                names.update(t.name for t in atom.args if isinstance(t, CName))
    return tuple(Const(n) for n in sorted(names))


def _constraint_atoms(dep):
    yield from dep.body
    if hasattr(dep, "heads"):
        for h in dep.heads:
            yield from h.atoms


def enumerate_extensions(v: Instance, s: Schema, d: DomainBound,
                         extra_constants: Tuple[Const, ...] = ()) -> Iterator[Instance]:
    """All F with Visible(F) = v and hidden facts over the bounded domain.

    Deterministic: hidden relations by name, tuples lexicographic, subsets by
    increasing cardinality.  Each hidden-fact subset appears exactly once.
    """
    base = Instance(s, frozenset(v.facts))
    domain = sorted(active_domain(base) | set(fresh_constants(d.extra_values))
                    | set(extra_constants), key=value_key)
    pool = []
    for rel in sorted(s.hidden_relations, key=lambda r: r.name):
        for tup in itertools.product(domain, repeat=rel.arity):
            pool.append(Fact(rel.name, tup))
    budget = max(d.max_facts_total - len(base.facts), 0)
    top = min(len(pool), budget)
    size = sum(_comb(len(pool), k) for k in range(top + 1))
    if size > d.space_ceiling:
        raise SearchSpaceTooLarge(size)
    for k in range(top + 1):
        for combo in itertools.combinations(pool, k):
            yield base.with_facts(combo)


def _comb(n: int, k: int) -> int:
    import math

    return math.comb(n, k)


def _models(q_guard: ConstraintSet, v: Instance, s: Schema, d: DomainBound,
            extra_constants: Tuple[Const, ...] = ()) -> Iterator[Instance]:
    for f in enumerate_extensions(v, s, d, extra_constants):
        if satisfies(q_guard, f):
            yield f


def oracle_pqi(q: UCQ, c: ConstraintSet, s: Schema, v: Instance, d: DomainBound) -> OracleAnswer:
    """Does every bounded completion of v satisfying c satisfy q?"""
    for f in _models(c, v, s, d, named_constants(c, q)):
        if eval_ucq(q, f) is not True:
            return OracleAnswer(False, EXACT, witness=f)
    return OracleAnswer(True, BOUNDED)


def oracle_nqi(
    q: UCQ, c: ConstraintSet, s: Schema, v: Instance, d: DomainBound, exact_for_class: bool = False
) -> OracleAnswer:
    """Does every bounded completion of v satisfying c falsify q?"""
    for f in _models(c, v, s, d, named_constants(c, q)):
        if eval_ucq(q, f) is True:
            return OracleAnswer(False, EXACT, witness=f)
    return OracleAnswer(True, EXACT if exact_for_class else BOUNDED)


def oracle_realizable(c: ConstraintSet, s: Schema, v: Instance, d: DomainBound) -> OracleAnswer:
    """Does some bounded completion of v satisfy c?"""
    for f in _models(c, v, s, d, named_constants(c)):
        return OracleAnswer(True, EXACT, witness=f)
    return OracleAnswer(False, BOUNDED)


def enumerate_supersets(i: Instance, s: Schema, d: DomainBound,
                        extra_constants: Tuple[Const, ...] = ()) -> Iterator[Instance]:
    """All supersets of i (any relation) over the bounded domain."""
    domain = sorted(active_domain(i) | set(fresh_constants(d.extra_values))
                    | set(extra_constants), key=value_key)
    pool = []
    for rel in sorted(s.relations, key=lambda r: r.name):
        for tup in itertools.product(domain, repeat=rel.arity):
            f = Fact(rel.name, tup)
            if f not in i.facts:
                pool.append(f)
    budget = max(d.max_facts_total - len(i.facts), 0)
    top = min(len(pool), budget)
    size = sum(_comb(len(pool), k) for k in range(top + 1))
    if size > d.space_ceiling:
        raise SearchSpaceTooLarge(size)
    for k in range(top + 1):
        for combo in itertools.combinations(pool, k):
            yield i.with_facts(combo)


def oracle_owq(q: UCQ, c: ConstraintSet, i: Instance, d: DomainBound) -> OracleAnswer:
    """Does q hold in every bounded superset of i satisfying c?"""
    for f in enumerate_supersets(i, i.schema, d, named_constants(c, q)):
        if satisfies(c, f) and eval_ucq(q, f) is not True:
            return OracleAnswer(False, EXACT, witness=f)
    return OracleAnswer(True, BOUNDED)
