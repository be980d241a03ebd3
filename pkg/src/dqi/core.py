"""Schemas, instances, dependencies, queries and homomorphisms.

Everything here is an immutable value; operations are pure functions.
Constants obey the unique name assumption: distinct names denote
distinct values, and a constant is never equal to a labeled null.
"""
from __future__ import annotations

import itertools
import weakref
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, Iterator, Mapping, Optional, Sequence, Tuple, Union


class SchemaError(ValueError):
    """A fact, atom or query does not fit the schema it is used with."""


class ClassError(ValueError):
    """A constraint set is outside the class a method requires."""


# ---------------------------------------------------------------------------
# values and terms


@dataclass(frozen=True)
class Const:
    name: str

    def __repr__(self) -> str:
        return f"Const({self.name!r})"


@dataclass(frozen=True)
class Null:
    id: int

    def __repr__(self) -> str:
        return f"Null({self.id})"


Value = Union[Const, Null]


def value_key(v: Value) -> Tuple[int, object]:
    """Total order over values: constants by name, then nulls by id."""
    if isinstance(v, Const):
        return (0, v.name)
    return (1, v.id)


@dataclass(frozen=True)
class Var:
    name: str

    def __repr__(self) -> str:
        return f"Var({self.name!r})"


@dataclass(frozen=True)
class CName:
    """A constant mentioned inside a formula."""

    name: str

    def __repr__(self) -> str:
        return f"CName({self.name!r})"


Term = Union[Var, CName]


class NullSource:
    """Hands out fresh nulls with ids unique within one computation."""

    def __init__(self, start: int = 1):
        self._counter = itertools.count(start)

    def fresh(self) -> Null:
        return Null(next(self._counter))

    @classmethod
    def above(cls, *instances: "Instance") -> "NullSource":
        top = 0
        for inst in instances:
            for f in inst.facts:
                for v in f.args:
                    if isinstance(v, Null) and v.id > top:
                        top = v.id
        return cls(top + 1)


# ---------------------------------------------------------------------------
# schema


@dataclass(frozen=True)
class RelationDecl:
    name: str
    arity: int
    visible: bool

    def __post_init__(self) -> None:
        if self.arity < 0:
            raise SchemaError(f"negative arity for {self.name}")


@dataclass(frozen=True)
class Schema:
    relations: Tuple[RelationDecl, ...]

    def __post_init__(self) -> None:
        names = [r.name for r in self.relations]
        if len(names) != len(set(names)):
            raise SchemaError("duplicate relation name")
        object.__setattr__(self, "relations", tuple(sorted(self.relations, key=lambda r: r.name)))

    @property
    def by_name(self) -> Dict[str, RelationDecl]:
        return {r.name: r for r in self.relations}

    def decl(self, name: str) -> RelationDecl:
        try:
            return self.by_name[name]
        except KeyError:
            raise SchemaError(f"undeclared relation {name}") from None

    @property
    def visible_relations(self) -> Tuple[RelationDecl, ...]:
        return tuple(r for r in self.relations if r.visible)

    @property
    def hidden_relations(self) -> Tuple[RelationDecl, ...]:
        return tuple(r for r in self.relations if not r.visible)

    def with_relations(self, extra: Iterable[RelationDecl]) -> "Schema":
        return Schema(self.relations + tuple(extra))


# ---------------------------------------------------------------------------
# atoms, facts, instances


@dataclass(frozen=True)
class Atom:
    relation: str
    args: Tuple[Term, ...]

    @property
    def variables(self) -> Tuple[Var, ...]:
        seen = []
        for t in self.args:
            if isinstance(t, Var) and t not in seen:
                seen.append(t)
        return tuple(seen)


@dataclass(frozen=True)
class Fact:
    relation: str
    args: Tuple[Value, ...]


def fact_key(f: Fact) -> Tuple:
    return (f.relation, tuple(value_key(v) for v in f.args))


@dataclass(frozen=True)
class Instance:
    schema: Schema
    facts: FrozenSet[Fact] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "facts", frozenset(self.facts))
        for f in self.facts:
            decl = self.schema.decl(f.relation)
            if len(f.args) != decl.arity:
                raise SchemaError(f"arity mismatch in fact {f.relation}/{len(f.args)}")

    def sorted_facts(self) -> Tuple[Fact, ...]:
        return tuple(sorted(self.facts, key=fact_key))

    def visible(self) -> "Instance":
        vis = {f for f in self.facts if self.schema.decl(f.relation).visible}
        return Instance(self.schema, frozenset(vis))

    def with_facts(self, extra: Iterable[Fact]) -> "Instance":
        return Instance(self.schema, self.facts | set(extra))

    def facts_of(self, relation: str) -> Tuple[Fact, ...]:
        return tuple(sorted((f for f in self.facts if f.relation == relation), key=fact_key))


def active_domain(instance: Instance) -> FrozenSet[Value]:
    """Values occurring in some fact of the instance."""
    return frozenset(v for f in instance.facts for v in f.args)


# ---------------------------------------------------------------------------
# dependencies


@dataclass(frozen=True)
class HeadDisjunct:
    exist_vars: Tuple[Var, ...]
    atoms: Tuple[Atom, ...]


@dataclass(frozen=True)
class TGD:
    body: Tuple[Atom, ...]
    heads: Tuple[HeadDisjunct, ...]

    def __post_init__(self) -> None:
        if not self.heads:
            raise SchemaError("TGD with no head disjunct")
        body_vars = {v for a in self.body for v in a.variables}
        for h in self.heads:
            for a in h.atoms:
                for v in a.variables:
                    if v not in body_vars and v not in h.exist_vars:
                        raise SchemaError(f"unsafe head variable {v.name}")

    @property
    def frontier(self) -> Tuple[Var, ...]:
        """Universally quantified variables occurring in some head atom."""
        body_vars = {v for a in self.body for v in a.variables}
        out = []
        for h in self.heads:
            for a in h.atoms:
                for v in a.variables:
                    if v in body_vars and v not in h.exist_vars and v not in out:
                        out.append(v)
        return tuple(out)


@dataclass(frozen=True)
class EGD:
    body: Tuple[Atom, ...]
    left: Term
    right: Term

    def __post_init__(self) -> None:
        body_vars = {v for a in self.body for v in a.variables}
        for t in (self.left, self.right):
            if isinstance(t, Var) and t not in body_vars:
                raise SchemaError(f"unsafe EGD variable {t.name}")


Dependency = Union[TGD, EGD]


@dataclass(frozen=True)
class ConstraintSet:
    dependencies: Tuple[Dependency, ...] = ()

    @property
    def tgds(self) -> Tuple[TGD, ...]:
        return tuple(d for d in self.dependencies if isinstance(d, TGD))

    @property
    def egds(self) -> Tuple[EGD, ...]:
        return tuple(d for d in self.dependencies if isinstance(d, EGD))


# ---------------------------------------------------------------------------
# queries


@dataclass(frozen=True)
class CQ:
    free_vars: Tuple[Var, ...]
    exist_vars: Tuple[Var, ...]
    atoms: Tuple[Atom, ...]

    def __post_init__(self) -> None:
        atom_vars = {v for a in self.atoms for v in a.variables}
        for v in self.free_vars:
            if v not in atom_vars:
                raise SchemaError(f"free variable {v.name} occurs in no atom")

    @property
    def variables(self) -> Tuple[Var, ...]:
        seen = list(self.free_vars)
        for a in self.atoms:
            for v in a.variables:
                if v not in seen:
                    seen.append(v)
        return tuple(seen)


@dataclass(frozen=True)
class UCQ:
    disjuncts: Tuple[CQ, ...]

    def __post_init__(self) -> None:
        if not self.disjuncts:
            raise SchemaError("empty union query")
        sig = self.disjuncts[0].free_vars
        for d in self.disjuncts[1:]:
            if d.free_vars != sig:
                raise SchemaError("disjuncts disagree on free variables")

    @property
    def free_vars(self) -> Tuple[Var, ...]:
        return self.disjuncts[0].free_vars


def boolean_cq(atoms: Sequence[Atom]) -> CQ:
    """Boolean CQ existentially quantifying every variable of `atoms`."""
    atoms = tuple(atoms)
    seen: list = []
    for a in atoms:
        for v in a.variables:
            if v not in seen:
                seen.append(v)
    return CQ(free_vars=(), exist_vars=tuple(seen), atoms=atoms)


def boolean_ucq(*disjunct_atoms: Sequence[Atom]) -> UCQ:
    return UCQ(tuple(boolean_cq(a) for a in disjunct_atoms))


# ---------------------------------------------------------------------------
# homomorphisms

Homomorphism = Dict[Var, Value]


def _term_value(t: Term, mapping: Mapping[Var, Value]) -> Optional[Value]:
    if isinstance(t, CName):
        return Const(t.name)
    return mapping.get(t)


MatchState = Tuple[Dict[str, list], Dict[Tuple[str, int, Tuple[int, ...]], Dict[Tuple, list]]]

# instances are immutable, so the relation buckets and hash indexes built
# for matching can be reused across every search over the same instance
_match_state_cache: "weakref.WeakKeyDictionary[Instance, MatchState]" = (
    weakref.WeakKeyDictionary()
)


def _build_match_state(facts: FrozenSet[Fact]) -> MatchState:
    by_rel: Dict[str, list] = {}
    for f in facts:
        by_rel.setdefault(f.relation, []).append(f)
    for fs in by_rel.values():
        fs.sort(key=fact_key)
    return by_rel, {}


def find_homomorphisms(
    atoms: Sequence[Atom],
    target: Union[Instance, Iterable[Fact]],
    seed: Optional[Mapping[Var, Value]] = None,
) -> Iterator[Homomorphism]:
    """Enumerate extensions of `seed` mapping every atom onto a target fact.

    Backtracking search, most-constrained atom first; the output order is
    deterministic for fixed inputs.
    """
    if isinstance(target, Instance):
        state = _match_state_cache.get(target)
        if state is None:
            state = _build_match_state(target.facts)
            _match_state_cache[target] = state
    else:
        state = _build_match_state(frozenset(target))
    by_rel, index = state

    remaining = list(atoms)
    base: Homomorphism = dict(seed) if seed else {}

    def candidates(atom: Atom, mapping: Homomorphism) -> list:
        bound: list = []
        key: list = []
        for pos, t in enumerate(atom.args):
            v = _term_value(t, mapping)
            if v is not None:
                bound.append(pos)
                key.append(v)
        sig = (atom.relation, len(atom.args), tuple(bound))
        table = index.get(sig)
        if table is None:
            table = {}
            for f in by_rel.get(atom.relation, ()):
                if len(f.args) != sig[1]:
                    continue
                table.setdefault(tuple(f.args[p] for p in sig[2]), []).append(f)
            index[sig] = table
        return table.get(tuple(key), [])

    def extend(mapping: Homomorphism, todo: list) -> Iterator[Homomorphism]:
        if not todo:
            yield dict(mapping)
            return
        # pick the atom with the smallest branching per newly bound
        # variable: a beats b when |cand_a| ** new_b < |cand_b| ** new_a
        # (fully bound atoms are pure membership checks and always win)
        best = None  # (count, new_vars, position, atom, candidate list)
        for i, a in enumerate(todo):
            cand = candidates(a, mapping)
            new_vars = len({t for t in a.args
                            if isinstance(t, Var) and t not in mapping})
            if new_vars == 0:
                best = (len(cand), 0, i, a, cand)
                break
            if best is None or (best[1] > 0
                                and len(cand) ** best[1] < best[0] ** new_vars):
                best = (len(cand), new_vars, i, a, cand)
        assert best is not None
        _, _, pos, atom, cand = best
        rest = todo[:pos] + todo[pos + 1:]
        for f in cand:
            delta: Homomorphism = {}
            ok = True
            for t, v in zip(atom.args, f.args):
                want = _term_value(t, {**mapping, **delta})
                if want is None:
                    delta[t] = v  # type: ignore[index]
                elif want != v:
                    ok = False
                    break
            if ok:
                yield from extend({**mapping, **delta}, rest)

    return extend(base, remaining)


def apply_hom(atoms: Sequence[Atom], mapping: Mapping[Var, Value]) -> Tuple[Fact, ...]:
    """Instantiate atoms into facts under a total variable assignment."""
    out = []
    for a in atoms:
        args = []
        for t in a.args:
            v = _term_value(t, mapping)
            if v is None:
                raise SchemaError(f"unmapped variable {t}")
            args.append(v)
        out.append(Fact(a.relation, tuple(args)))
    return tuple(out)


def map_instance(instance: Instance, value_map: Mapping[Value, Value]) -> Instance:
    """Apply a value substitution to every fact."""
    facts = set()
    for f in instance.facts:
        facts.add(Fact(f.relation, tuple(value_map.get(v, v) for v in f.args)))
    return Instance(instance.schema, frozenset(facts))


def instance_hom_exists(source: Instance, target: Instance) -> bool:
    """Is there a homomorphism source -> target fixing constants?"""
    atoms = []
    for f in source.sorted_facts():
        args: list = []
        for v in f.args:
            if isinstance(v, Const):
                args.append(CName(v.name))
            else:
                args.append(Var(f"n_{v.id}"))
        atoms.append(Atom(f.relation, tuple(args)))
    for _ in find_homomorphisms(atoms, target):
        return True
    return False


# ---------------------------------------------------------------------------
# semantic operations


def eval_ucq(q: UCQ, instance: Instance):
    """Evaluate a UCQ; Boolean queries give a bool, open ones answer tuples."""
    for d in q.disjuncts:
        for a in d.atoms:
            decl = instance.schema.decl(a.relation)
            if decl.arity != len(a.args):
                raise SchemaError(f"arity mismatch for {a.relation} in query")
    if not q.free_vars:
        for d in q.disjuncts:
            for _ in find_homomorphisms(d.atoms, instance):
                return True
        return False
    answers = set()
    for d in q.disjuncts:
        for h in find_homomorphisms(d.atoms, instance):
            answers.add(tuple(h[v] for v in q.free_vars))
    return frozenset(answers)


def satisfies(c: ConstraintSet, instance: Instance) -> bool:
    """Does the instance satisfy every dependency?"""
    for dep in c.dependencies:
        if isinstance(dep, TGD):
            for h in find_homomorphisms(dep.body, instance):
                if not any(
                    _head_satisfied(disjunct, h, instance) for disjunct in dep.heads
                ):
                    return False
        else:
            for h in find_homomorphisms(dep.body, instance):
                if _term_value(dep.left, h) != _term_value(dep.right, h):
                    return False
    return True


def _head_satisfied(disjunct: HeadDisjunct, body_hom: Homomorphism, instance: Instance) -> bool:
    seed = {v: val for v, val in body_hom.items() if v not in disjunct.exist_vars}
    for _ in find_homomorphisms(disjunct.atoms, instance, seed=seed):
        return True
    return False


# ---------------------------------------------------------------------------
# constraint classification

ID_TAG = "ID"
LINEAR_TAG = "LinearTGD"
FGTGD_TAG = "FGTGD"
CONNECTED_TAG = "ConnectedBody"
DISJ_TAG = "DisjunctiveHead"
CONST_TAG = "HasConstants"
EGD_TAG = "HasEGD"
CQVIEW_TAG = "CQViewScenario"


def _atom_constants(a: Atom) -> bool:
    return any(isinstance(t, CName) for t in a.args)


def _dep_atoms(dep: Dependency) -> Iterator[Atom]:
    yield from dep.body
    if isinstance(dep, TGD):
        for h in dep.heads:
            yield from h.atoms


def _is_id(t: TGD) -> bool:
    if len(t.body) != 1 or len(t.heads) != 1 or len(t.heads[0].atoms) != 1:
        return False
    body, head = t.body[0], t.heads[0].atoms[0]
    for a in (body, head):
        if _atom_constants(a):
            return False
        if len(set(a.args)) != len(a.args):
            return False
    return True


def _is_linear(t: TGD) -> bool:
    return len(t.body) == 1


def _is_fg(t: TGD) -> bool:
    frontier = set(t.frontier)
    return any(frontier <= set(a.variables) for a in t.body)


def _is_connected(t: TGD) -> bool:
    atoms = list(t.body)
    if len(atoms) <= 1:
        return True
    # atoms are linked when they share a variable; 0-ary atoms stay isolated
    reached = {0}
    frontier = [0]
    while frontier:
        i = frontier.pop()
        for j in range(len(atoms)):
            if j not in reached and set(atoms[i].variables) & set(atoms[j].variables):
                reached.add(j)
                frontier.append(j)
    return len(reached) == len(atoms)


def _rename_key(atoms: Sequence[Atom]) -> Tuple:
    """Canonical form of an atom set up to variable renaming."""
    order: Dict[Var, int] = {}
    out = []
    for a in sorted(atoms, key=lambda a: (a.relation, len(a.args))):
        sig = []
        for t in a.args:
            if isinstance(t, CName):
                sig.append(("c", t.name))
            else:
                if t not in order:
                    order[t] = len(order)
                sig.append(("v", order[t]))
        out.append((a.relation, tuple(sig)))
    return tuple(sorted(out))


def _is_cq_view_scenario(c: ConstraintSet, s: Schema) -> bool:
    """All dependencies pair up as a view definition per visible relation:
    R(x) -> exists y. phi(x, y) together with phi(x, y) -> R(x)."""
    deps = list(c.dependencies)
    if not deps or any(isinstance(d, EGD) for d in deps):
        return False
    tgds = [d for d in deps if isinstance(d, TGD)]
    if any(len(t.heads) != 1 for t in tgds):
        return False
    used = set()
    for i, t1 in enumerate(tgds):
        if i in used:
            continue
        if len(t1.body) != 1:
            continue
        r_atom = t1.body[0]
        if not s.decl(r_atom.relation).visible:
            continue
        if any(not isinstance(x, Var) for x in r_atom.args) or len(set(r_atom.args)) != len(r_atom.args):
            continue
        phi = t1.heads[0].atoms
        for j, t2 in enumerate(tgds):
            if j == i or j in used:
                continue
            if t2.heads[0].exist_vars or len(t2.heads[0].atoms) != 1:
                continue
            back = t2.heads[0].atoms[0]
            if back.relation != r_atom.relation:
                continue
            if _rename_key(tuple(phi) + (r_atom,)) == _rename_key(tuple(t2.body) + (back,)):
                used.update({i, j})
                break
    return len(used) == len(tgds) and bool(tgds)


def classify(c: ConstraintSet, s: Schema) -> FrozenSet[str]:
    """Syntactic class tags of a constraint set; recomputable and order-stable."""
    tags = set()
    tgds = c.tgds
    if c.egds:
        tags.add(EGD_TAG)
    if any(_atom_constants(a) for d in c.dependencies for a in _dep_atoms(d)) or any(
        isinstance(t, CName) for e in c.egds for t in (e.left, e.right)
    ):
        tags.add(CONST_TAG)
    if any(len(t.heads) > 1 for t in tgds):
        tags.add(DISJ_TAG)
    if all(_is_id(t) for t in tgds):
        tags.add(ID_TAG)
    if all(_is_linear(t) for t in tgds):
        tags.add(LINEAR_TAG)
    if all(_is_fg(t) for t in tgds):
        tags.add(FGTGD_TAG)
    if all(_is_connected(t) for t in tgds) and all(_is_connected_egd(e) for e in c.egds):
        tags.add(CONNECTED_TAG)
    if _is_cq_view_scenario(c, s):
        tags.add(CQVIEW_TAG)
    return frozenset(tags)


def _is_connected_egd(e: EGD) -> bool:
    return _is_connected(TGD(e.body, (HeadDisjunct((), e.body[:1]),))) if e.body else True


# ---------------------------------------------------------------------------
# canonical structures


def canonical_db(q: CQ, schema: Schema, nulls: Optional[NullSource] = None) -> Instance:
    """The query's atoms read as facts, variables becoming fresh nulls."""
    if q.free_vars:
        raise SchemaError("canonical database requires a Boolean query")
    nulls = nulls or NullSource()
    mapping: Homomorphism = {}
    for a in q.atoms:
        for t in a.args:
            if isinstance(t, Var) and t not in mapping:
                mapping[t] = nulls.fresh()
    return Instance(schema, frozenset(apply_hom(q.atoms, mapping)))


def canonical_query(instance: Instance) -> CQ:
    """Each value v becomes an existential variable y_v; facts become atoms."""
    names: Dict[Value, Var] = {}
    for v in sorted(active_domain(instance), key=value_key):
        if isinstance(v, Const):
            names[v] = Var(f"y_c_{v.name}")
        else:
            names[v] = Var(f"y_n_{v.id}")
    atoms = tuple(
        Atom(f.relation, tuple(names[v] for v in f.args)) for f in instance.sorted_facts()
    )
    return boolean_cq(atoms)


def critical_instance(s: Schema, a: Const) -> Instance:
    """Every visible relation holds the single all-`a` tuple; hidden ones empty."""
    facts = {Fact(r.name, (a,) * r.arity) for r in s.visible_relations}
    return Instance(s, frozenset(facts))


def normalize_single_head(c: ConstraintSet, s: Schema) -> Tuple[ConstraintSet, Schema]:
    """Split multi-atom TGD heads through fresh hidden intermediate relations.

    Answer-preserving for query implication: the intermediate relation records
    the head's variable assignment and each original head atom is re-derived
    from it.
    """
    deps: list = []
    extra: list = []
    counter = itertools.count(1)
    existing = set(s.by_name)

    def route(head: HeadDisjunct) -> HeadDisjunct:
        head_vars = []
        for a in head.atoms:
            for v in a.variables:
                if v not in head_vars:
                    head_vars.append(v)
        while True:
            aux_name = f"_aux_h{next(counter)}"
            if aux_name not in existing:
                break
        existing.add(aux_name)
        extra.append(RelationDecl(aux_name, len(head_vars), visible=False))
        aux_atom = Atom(aux_name, tuple(head_vars))
        for a in head.atoms:
            deps.append(TGD((aux_atom,), (HeadDisjunct((), (a,)),)))
        return HeadDisjunct(head.exist_vars, (aux_atom,))

    for dep in c.dependencies:
        if isinstance(dep, EGD):
            deps.append(dep)
            continue
        if all(len(h.atoms) <= 1 for h in dep.heads):
            deps.append(dep)
            continue
        heads = tuple(h if len(h.atoms) <= 1 else route(h) for h in dep.heads)
        deps.append(TGD(dep.body, heads))
    return ConstraintSet(tuple(deps)), s.with_relations(extra)
