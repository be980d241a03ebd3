"""Chase procedures over partially visible schemas.

Three variants live here:

- `classical_chase`: the standard restricted chase with a fair FIFO
  trigger queue, used for open-world query answering.
- `visible_chase`: builds a tree of instances; whenever a step creates a
  visible fact, the affected values are grounded into the active domain
  of the fixed visible instance, branching over every grounding
  homomorphism and appending a dummy node when none exists.  EGD steps
  identify values and fail (dummy) on a constant/constant conflict.
- `chase_vis_critical`: the single branch the visible chase takes when
  started from the critical instance (every visible relation holding one
  all-`a` tuple); there are no grounding choices because the visible
  active domain is the singleton `{a}`.

Plus the fact-type saturation for linear constraint sets, which makes
query implication over the critical instance decidable without
materializing an unbounded chase.
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, FrozenSet, Iterator, List, Mapping, Optional, Sequence, Set, Tuple

from .core import (
    Atom,
    CName,
    CQ,
    Const,
    ConstraintSet,
    ClassError,
    Dependency,
    EGD,
    Fact,
    HeadDisjunct,
    Homomorphism,
    Instance,
    Null,
    NullSource,
    Schema,
    TGD,
    UCQ,
    Value,
    Var,
    active_domain,
    apply_hom,
    critical_instance,
    eval_ucq,
    fact_key,
    find_homomorphisms,
    map_instance,
    satisfies,
    value_key,
)


@dataclass(frozen=True)
class ChaseBudget:
    max_nodes: int = 10000
    max_facts: int = 2000
    max_depth: int = 200

    def __post_init__(self) -> None:
        if min(self.max_nodes, self.max_facts, self.max_depth) <= 0:
            raise ValueError("budget fields must be positive")


SATURATED = "saturated"
BUDGET = "budget_exceeded"
EGD_FAILURE = "egd_failure"


@dataclass(frozen=True)
class ChaseResult:
    status: str
    instance: Instance


# ---------------------------------------------------------------------------
# trigger bookkeeping


def _hom_key(dep_idx: int, hom: Mapping[Var, Value]) -> Tuple:
    return (dep_idx, tuple(sorted(((v.name, val) for v, val in hom.items()), key=lambda p: (p[0], value_key(p[1])))))


class _Triggers:
    """FIFO queue of (dependency, body homomorphism) pairs for one branch."""

    def __init__(self, pending: Optional[List[Tuple[int, Homomorphism]]] = None,
                 seen: Optional[Set[Tuple]] = None):
        self.pending: deque = deque(pending or [])
        self.seen: Set[Tuple] = set(seen or ())

    def discover(self, deps: Sequence[Dependency], instance: Instance) -> None:
        for idx, dep in enumerate(deps):
            for hom in find_homomorphisms(dep.body, instance):
                key = _hom_key(idx, hom)
                if key not in self.seen:
                    self.seen.add(key)
                    self.pending.append((idx, hom))

    def pop(self) -> Optional[Tuple[int, Homomorphism]]:
        if self.pending:
            return self.pending.popleft()
        return None

    def copy(self) -> "_Triggers":
        return _Triggers(list(self.pending), set(self.seen))

    def remap(self, value_map: Mapping[Value, Value]) -> "_Triggers":
        pending = []
        seen = set()
        for idx, hom in self.pending:
            hom2 = {v: value_map.get(val, val) for v, val in hom.items()}
            pending.append((idx, hom2))
        for key in self.seen:
            idx, items = key
            items2 = tuple(
                sorted(
                    ((name, value_map.get(val, val)) for name, val in items),
                    key=lambda p: (p[0], value_key(p[1])),
                )
            )
            seen.add((idx, items2))
        return _Triggers(pending, seen)


def _tgd_active(dep: TGD, hom: Homomorphism, instance: Instance) -> bool:
    for disjunct in dep.heads:
        seed = {v: val for v, val in hom.items() if v not in disjunct.exist_vars}
        for _ in find_homomorphisms(disjunct.atoms, instance, seed=seed):
            return False
    return True


def _egd_values(dep: EGD, hom: Homomorphism) -> Tuple[Value, Value]:
    def term_value(t):
        if isinstance(t, CName):
            return Const(t.name)
        return hom[t]

    return term_value(dep.left), term_value(dep.right)


def _merge_map(u: Value, v: Value) -> Mapping[Value, Value]:
    """Substitution identifying u and v; nulls collapse into the other value."""
    if isinstance(u, Null) and isinstance(v, Null):
        keep, drop = (u, v) if u.id < v.id else (v, u)
        return {drop: keep}
    if isinstance(u, Null):
        return {u: v}
    return {v: u}


# ---------------------------------------------------------------------------
# classical chase


def classical_chase(i: Instance, c: ConstraintSet, b: ChaseBudget,
                    tripwire: Optional[Callable[[Instance], bool]] = None) -> ChaseResult:
    """Restricted chase with fair FIFO scheduling.

    `tripwire` lets a caller stop as soon as a monotone condition holds
    (the result then carries the current instance with status saturated
    only if it genuinely is).
    """
    for t in c.tgds:
        if len(t.heads) > 1:
            raise ClassError("classical chase requires non-disjunctive TGDs")
    deps = list(c.dependencies)
    nulls = NullSource.above(i)
    current = i
    triggers = _Triggers()
    steps = 0
    while True:
        if tripwire and tripwire(current):
            return ChaseResult(SATURATED if satisfies(c, current) else BUDGET, current)
        triggers.discover(deps, current)
        item = triggers.pop()
        if item is None:
            return ChaseResult(SATURATED, current)
        idx, hom = item
        dep = deps[idx]
        if isinstance(dep, TGD):
            if not _tgd_active(dep, hom, current):
                continue
            disjunct = dep.heads[0]
            ext = dict(hom)
            for v in disjunct.exist_vars:
                ext[v] = nulls.fresh()
            current = current.with_facts(apply_hom(disjunct.atoms, ext))
        else:
            u, v = _egd_values(dep, hom)
            if u == v:
                continue
            if isinstance(u, Const) and isinstance(v, Const):
                return ChaseResult(EGD_FAILURE, current)
            m = _merge_map(u, v)
            current = map_instance(current, m)
            triggers = triggers.remap(m)
        steps += 1
        if steps > b.max_depth or len(current.facts) > b.max_facts:
            return ChaseResult(BUDGET, current)


# ---------------------------------------------------------------------------
# visible chase tree

OPEN = "open"
EXPANDED = "expanded"
LEAF = "leaf"
DUMMY = "dummy"
BUDGET_CUT = "budget_cut"
PRUNED = "pruned"


@dataclass
class ChaseNode:
    id: int
    instance: Instance
    status: str
    parent: Optional[int]
    depth: int
    applied_step: str = ""
    _triggers: Optional[_Triggers] = None


@dataclass
class ChaseTree:
    root: int
    nodes: Dict[int, ChaseNode]

    def leaves(self) -> List[ChaseNode]:
        return [n for n in self.nodes.values() if n.status == LEAF]

    def by_status(self, status: str) -> List[ChaseNode]:
        return [n for n in self.nodes.values() if n.status == status]

    def trace_tsv(self) -> str:
        lines = ["id\tparent\tstatus\tdepth\tstep"]
        for nid in sorted(self.nodes):
            n = self.nodes[nid]
            parent = "" if n.parent is None else str(n.parent)
            lines.append(f"{n.id}\t{parent}\t{n.status}\t{n.depth}\t{n.applied_step}")
        return "\n".join(lines) + "\n"


def _grounding_children(
    k_prime: Instance,
    new_facts: Sequence[Fact],
    visible_part: Instance,
    schema: Schema,
) -> List[Tuple[Instance, str, Dict[Value, Value]]]:
    """Ground a step's new visible facts into the visible active domain.

    Returns the list of distinct grounded instances (with a description of
    the grounding), or an empty list when no grounding homomorphism exists.
    """
    new_visible = [f for f in new_facts if schema.decl(f.relation).visible]
    if not new_visible:
        return [(k_prime, "", {})]
    adom_v = sorted(active_domain(visible_part), key=value_key)
    move: List[Value] = []
    for f in new_visible:
        for v in f.args:
            if isinstance(v, Null) and v not in move:
                move.append(v)
            if isinstance(v, Const) and v not in active_domain(visible_part):
                return []  # a constant outside the visible domain can never match
    out: List[Tuple[Instance, str, Dict[Value, Value]]] = []
    seen: Set[FrozenSet[Fact]] = set()
    for combo in itertools.product(adom_v, repeat=len(move)):
        g = dict(zip(move, combo))
        image = map_instance(k_prime, g)
        if image.visible().facts == visible_part.facts:
            if image.facts not in seen:
                seen.add(image.facts)
                desc = ",".join(f"?{n.id}->{_vname(val)}" for n, val in zip(move, combo))
                out.append((image, desc, g))
    return out


def _vname(v: Value) -> str:
    return v.name if isinstance(v, Const) else f"?{v.id}"


def visible_chase(
    c: ConstraintSet,
    s: Schema,
    f0: Instance,
    b: ChaseBudget,
    prune: Optional[Callable[[Instance], bool]] = None,
) -> ChaseTree:
    """Build the visible chase tree from the visible instance `f0`.

    `prune` marks a branch as settled once a monotone predicate holds on
    its instance (sound for query implication because homomorphic images
    preserve the query).
    """
    visible_part = f0.visible()
    nulls = NullSource.above(f0)
    root = ChaseNode(0, Instance(s, f0.facts), OPEN, None, 0, "", _Triggers())
    nodes = {0: root}
    frontier: deque = deque([0])
    next_id = itertools.count(1)
    deps = list(c.dependencies)

    def new_node(instance: Instance, status: str, parent: ChaseNode, step: str,
                 triggers: Optional[_Triggers]) -> ChaseNode:
        n = ChaseNode(next(next_id), instance, status, parent.id, parent.depth + 1, step, triggers)
        nodes[n.id] = n
        return n

    while frontier:
        if len(nodes) >= b.max_nodes:
            while frontier:
                nodes[frontier.popleft()].status = BUDGET_CUT
            break
        node = nodes[frontier.popleft()]
        if node.status != OPEN:
            continue
        if prune is not None and prune(node.instance):
            node.status = PRUNED
            continue
        if node.depth >= b.max_depth or len(node.instance.facts) > b.max_facts:
            node.status = BUDGET_CUT
            continue
        triggers = node._triggers or _Triggers()
        triggers.discover(deps, node.instance)
        fired = False
        while not fired:
            item = triggers.pop()
            if item is None:
                node.status = LEAF
                break
            idx, hom = item
            dep = deps[idx]
            if isinstance(dep, TGD):
                if not _tgd_active(dep, hom, node.instance):
                    continue
                fired = True
                for d_idx, disjunct in enumerate(dep.heads):
                    ext = dict(hom)
                    fresh: List[Null] = []
                    for v in disjunct.exist_vars:
                        n = nulls.fresh()
                        ext[v] = n
                        fresh.append(n)
                    new_facts = apply_hom(disjunct.atoms, ext)
                    k_prime = node.instance.with_facts(new_facts)
                    step = f"tgd#{idx}/{d_idx}"
                    grounded = _grounding_children(k_prime, new_facts, visible_part, s)
                    if not grounded:
                        new_node(k_prime, DUMMY, node, step + " no-grounding", None)
                        continue
                    for image, desc, gmap in grounded:
                        child_triggers = triggers.copy().remap(gmap) if gmap else triggers.copy()
                        child = new_node(image, OPEN, node, step + (f" [{desc}]" if desc else ""),
                                         child_triggers)
                        frontier.append(child.id)
            else:
                u, v = _egd_values(dep, hom)
                if u == v:
                    continue
                fired = True
                step = f"egd#{idx} {_vname(u)}={_vname(v)}"
                if isinstance(u, Const) and isinstance(v, Const):
                    new_node(node.instance, DUMMY, node, step + " const-conflict", None)
                    continue
                m = _merge_map(u, v)
                image = map_instance(node.instance, m)
                if image.visible().facts != visible_part.facts:
                    new_node(image, DUMMY, node, step + " visible-changed", None)
                    continue
                child = new_node(image, OPEN, node, step, triggers.copy().remap(m))
                frontier.append(child.id)
        if fired:
            node.status = EXPANDED
        node._triggers = None
    return ChaseTree(0, nodes)


# ---------------------------------------------------------------------------
# critical-instance chase


def chase_vis_critical(c: ConstraintSet, s: Schema, a: Const, b: ChaseBudget) -> ChaseResult:
    """The unique visible-chase branch from the critical instance V_a.

    Requires constant-free, non-disjunctive constraints: then every
    grounding choice is forced (the visible active domain is `{a}`) and
    no EGD can clash two distinct constants.
    """
    from .core import classify, CONST_TAG, DISJ_TAG

    tags = classify(c, s)
    if CONST_TAG in tags:
        raise ClassError("critical-instance chase requires constant-free constraints")
    if DISJ_TAG in tags:
        raise ClassError("critical-instance chase requires non-disjunctive heads")
    start = critical_instance(s, a)
    nulls = NullSource.above(start)
    current = start
    triggers = _Triggers()
    steps = 0
    while True:
        triggers.discover(c.dependencies, current)
        item = triggers.pop()
        if item is None:
            return ChaseResult(SATURATED, current)
        idx, hom = item
        dep = c.dependencies[idx]
        if isinstance(dep, TGD):
            if not _tgd_active(dep, hom, current):
                continue
            disjunct = dep.heads[0]
            ext = dict(hom)
            for v in disjunct.exist_vars:
                ext[v] = nulls.fresh()
            new_facts = apply_hom(disjunct.atoms, ext)
            grounding: Dict[Value, Value] = {}
            for f in new_facts:
                if s.decl(f.relation).visible:
                    for val in f.args:
                        if isinstance(val, Null):
                            grounding[val] = a
            current = current.with_facts(new_facts)
            if grounding:
                current = map_instance(current, grounding)
                triggers = triggers.remap(grounding)
        else:
            u, v = _egd_values(dep, hom)
            if u == v:
                continue
            m = _merge_map(u, v)
            current = map_instance(current, m)
            triggers = triggers.remap(m)
        steps += 1
        if steps > b.max_depth or len(current.facts) > b.max_facts:
            return ChaseResult(BUDGET, current)


# ---------------------------------------------------------------------------
# fact types for linear constraint sets
#
# A fact type abstracts a fact of the critical-instance chase: a relation
# plus a pattern assigning each position either the distinguished constant
# `a` or a numbered null group (equal numbers mean equal nulls).  `A`
# denotes the constant; groups are canonically renumbered 1, 2, ... in
# order of first occurrence.

A_MARK = 0


def canon_pattern(entries: Sequence[int]) -> Tuple[int, ...]:
    ren: Dict[int, int] = {}
    out = []
    for e in entries:
        if e == A_MARK:
            out.append(A_MARK)
        else:
            if e not in ren:
                ren[e] = len(ren) + 1
            out.append(ren[e])
    return tuple(out)


@dataclass(frozen=True)
class FactType:
    relation: str
    pattern: Tuple[int, ...]  # A_MARK for `a`, else group number

    def groups(self) -> Tuple[int, ...]:
        seen = []
        for e in self.pattern:
            if e != A_MARK and e not in seen:
                seen.append(e)
        return tuple(seen)


@dataclass(frozen=True)
class TypeEdge:
    """One linear-TGD application step between fact types.

    `correspondence` maps a source pattern group to the target pattern
    entry it is copied into (absent when the group is dropped); fresh
    target groups come from existential variables.
    """

    source: FactType
    dep_index: int
    target: FactType
    correspondence: Tuple[Tuple[int, int], ...]


def _linear_tgds(c: ConstraintSet) -> List[Tuple[int, TGD]]:
    out = []
    for idx, dep in enumerate(c.dependencies):
        if isinstance(dep, EGD):
            raise ClassError("fact types require TGD-only constraint sets")
        if len(dep.body) != 1 or len(dep.heads) != 1 or len(dep.heads[0].atoms) != 1:
            raise ClassError("fact types require linear single-head TGDs")
        for atom in (dep.body[0], dep.heads[0].atoms[0]):
            if any(isinstance(t, CName) for t in atom.args):
                raise ClassError("fact types require constant-free constraints")
        out.append((idx, dep))
    return out


def _apply_linear(dep_idx: int, dep: TGD, t: FactType) -> Optional[Tuple[FactType, Tuple[Tuple[int, int], ...]]]:
    """Unify the TGD body with the fact type; give the raw produced type."""
    body = dep.body[0]
    head = dep.heads[0].atoms[0]
    if body.relation != t.relation:
        return None
    assign: Dict[Var, int] = {}
    for term, entry in zip(body.args, t.pattern):
        var = term  # constant-free by precondition
        if var in assign and assign[var] != entry:
            return None
        assign[var] = entry  # type: ignore[index]
    fresh = itertools.count(max([e for e in t.pattern if e != A_MARK], default=0) + 1)
    exist_assign: Dict[Var, int] = {}
    out_entries: List[int] = []
    for term in head.args:
        if term in assign:
            out_entries.append(assign[term])  # copied position
        else:
            if term not in exist_assign:
                exist_assign[term] = next(fresh)
            out_entries.append(exist_assign[term])
    # canonical renumbering with correspondence tracking
    ren: Dict[int, int] = {}
    canon: List[int] = []
    for e in out_entries:
        if e == A_MARK:
            canon.append(A_MARK)
        else:
            if e not in ren:
                ren[e] = len(ren) + 1
            canon.append(ren[e])
    corr = tuple(sorted((g, ren[g]) for g in set(t.pattern) if g != A_MARK and g in ren))
    return FactType(head.relation, tuple(canon)), corr


@dataclass(frozen=True)
class TypeClosure:
    """Saturated fact-type graph for a linear constraint set.

    `forced` maps each type to the set of pattern groups that must equal
    the distinguished constant in the critical-instance chase (because a
    visible fact sharing that group is derivable).  `edges` is the
    derivability relation between collapse-stable types; `reachable` the
    types realized from the critical instance.
    """

    forced: Mapping[FactType, FrozenSet[int]]
    edges: Tuple[TypeEdge, ...]
    reachable: FrozenSet[FactType]
    visible_reach: Mapping[FactType, FrozenSet[FactType]]


def _collapse(t: FactType, forced: Mapping[FactType, FrozenSet[int]]) -> FactType:
    groups = forced.get(t, frozenset())
    if not groups:
        return t
    entries = [A_MARK if e in groups else e for e in t.pattern]
    return FactType(t.relation, canon_pattern(entries))


def fact_type_closure(c: ConstraintSet, s: Schema) -> TypeClosure:
    """Saturate forcing and derivability over fact types.

    Iterates: derive types by linear TGD application; whenever a derived
    type's relation is visible, its groups are forced to the constant in
    the producing type (grounding in the critical instance maps every
    value of a visible fact to `a`); forcing collapses patterns, which can
    enable more unifications, so repeat until stable.
    """
    linear = _linear_tgds(c)
    forced: Dict[FactType, Set[int]] = {}

    def all_types() -> Iterator[FactType]:
        for r in s.relations:
            for pat in _patterns(r.arity):
                yield FactType(r.name, pat)

    def forced_of(t: FactType) -> FrozenSet[int]:
        return frozenset(forced.get(t, set()))

    # forcing fixpoint over every type (derivations may start anywhere)
    changed = True
    while changed:
        changed = False
        for t in all_types():
            ct = _collapse(t, {k: frozenset(v) for k, v in forced.items()})
            for idx, dep in linear:
                res = _apply_linear(idx, dep, ct)
                if res is None:
                    continue
                target, corr = res
                corr_map = dict(corr)
                newly: Set[int] = set()
                if s.decl(target.relation).visible:
                    # grounding forces every group copied into the visible fact
                    newly = {g for g in corr_map}
                else:
                    tgt_forced = forced.get(_collapse(target, {k: frozenset(v) for k, v in forced.items()}), set())
                    tgt_forced |= forced.get(target, set())
                    newly = {g for g, g2 in corr_map.items() if g2 in tgt_forced}
                if newly:
                    # translate collapsed-type groups back to t's groups
                    back = _group_back_map(t, ct)
                    for g in newly:
                        for orig in back.get(g, ()):
                            if orig not in forced.setdefault(t, set()):
                                forced[t].add(orig)
                                changed = True

    forced_fz: Dict[FactType, FrozenSet[int]] = {k: frozenset(v) for k, v in forced.items()}

    # reachability from the critical instance over collapse-stable types
    roots = [FactType(r.name, (A_MARK,) * r.arity) for r in s.visible_relations]
    reachable: Set[FactType] = set()
    edges: List[TypeEdge] = []
    queue = deque()
    for r in roots:
        rc = _stable(r, forced_fz)
        if rc not in reachable:
            reachable.add(rc)
            queue.append(rc)
    while queue:
        t = queue.popleft()
        for idx, dep in linear:
            res = _apply_linear(idx, dep, t)
            if res is None:
                continue
            target, corr = res
            stable_target = _stable(target, forced_fz)
            corr2 = _restrict_corr(target, stable_target, corr)
            edges.append(TypeEdge(t, idx, stable_target, corr2))
            if stable_target not in reachable:
                reachable.add(stable_target)
                queue.append(stable_target)

    visible_reach: Dict[FactType, Set[FactType]] = {}
    for t in reachable:
        visible_reach[t] = set()
    edge_by_src: Dict[FactType, List[TypeEdge]] = {}
    for e in edges:
        edge_by_src.setdefault(e.source, []).append(e)
    changed = True
    while changed:
        changed = False
        for t in reachable:
            for e in edge_by_src.get(t, ()):  # pragma: no branch
                adds = set()
                if s.decl(e.target.relation).visible:
                    adds.add(e.target)
                adds |= visible_reach.get(e.target, set())
                if not adds <= visible_reach[t]:
                    visible_reach[t] |= adds
                    changed = True
    return TypeClosure(
        forced=forced_fz,
        edges=tuple(edges),
        reachable=frozenset(reachable),
        visible_reach={k: frozenset(v) for k, v in visible_reach.items()},
    )


def _stable(t: FactType, forced: Mapping[FactType, FrozenSet[int]]) -> FactType:
    while True:
        t2 = _collapse(t, forced)
        if t2 == t:
            return t
        t = t2


def _restrict_corr(raw_target: FactType, stable_target: FactType,
                   corr: Tuple[Tuple[int, int], ...]) -> Tuple[Tuple[int, int], ...]:
    """Push a correspondence through the collapse of the target type."""
    # map raw target groups to stable target entries by position
    pos_map: Dict[int, int] = {}
    ok_groups: Set[int] = set()
    for raw_e, st_e in zip(raw_target.pattern, stable_target.pattern):
        if raw_e == A_MARK:
            continue
        if st_e == A_MARK:
            continue
        pos_map[raw_e] = st_e
        ok_groups.add(raw_e)
    out = []
    for g, g2 in corr:
        if g2 in pos_map:
            out.append((g, pos_map[g2]))
    return tuple(sorted(out))


def _group_back_map(original: FactType, collapsed: FactType) -> Dict[int, List[int]]:
    """Which original groups end up as each collapsed group."""
    back: Dict[int, List[int]] = {}
    for o, c in zip(original.pattern, collapsed.pattern):
        if o == A_MARK or c == A_MARK:
            continue
        back.setdefault(c, [])
        if o not in back[c]:
            back[c].append(o)
    return back


def _patterns(arity: int) -> Iterator[Tuple[int, ...]]:
    """All canonical patterns of a given arity (entries: `a` or groups)."""
    if arity == 0:
        yield ()
        return
    for raw in itertools.product(range(arity + 1), repeat=arity):
        pat = canon_pattern(raw)
        if pat == raw:
            yield pat


# ---------------------------------------------------------------------------
# exact query implication over the critical instance (linear, constant-free)


def decide_pqi_critical_linear(q: UCQ, c: ConstraintSet, s: Schema) -> bool:
    """Does the critical-instance chase satisfy the query?  Exact.

    The chase from V_a unfolds the fact-type graph into a forest: each
    fact spawns one child per applicable linear TGD, and a null is shared
    only between a fact and its derivation descendants.  A disjunct holds
    iff its variables can be split into `a`-valued ones and null groups
    such that every all-`a` image fact has a reachable type and every
    null component embeds into one subtree of the forest.
    """
    closure = fact_type_closure(c, s)
    for disjunct in q.disjuncts:
        if disjunct.free_vars:
            raise ClassError("critical-instance decision requires Boolean queries")
        if _disjunct_embeds(disjunct, closure, s):
            return True
    return False


def _disjunct_embeds(d: CQ, closure: TypeClosure, s: Schema) -> bool:
    variables = list(d.variables)
    for assignment in _var_assignments(variables):
        image = []
        ok = True
        for atom in d.atoms:
            entries = []
            for t in atom.args:
                if isinstance(t, CName):
                    ok = False  # constant-free setting
                    break
                entries.append(assignment[t])
            if not ok:
                break
            image.append((atom.relation, tuple(entries)))
        if not ok:
            continue
        if _image_realized(image, closure, s):
            return True
    return False


def _var_assignments(variables: Sequence[Var]) -> Iterator[Dict[Var, int]]:
    """Assign each variable `a` (0) or a null id; null ids canonical."""
    n = len(variables)
    for raw in itertools.product(range(n + 1), repeat=n):
        # canonical: nonzero values appear in increasing first-use order
        ren: Dict[int, int] = {}
        out: Dict[Var, int] = {}
        canonical = True
        for v, e in zip(variables, raw):
            if e == 0:
                out[v] = 0
            else:
                if e not in ren:
                    nxt = len(ren) + 1
                    if e != nxt:
                        canonical = False
                        break
                    ren[e] = nxt
                out[v] = ren[e]
        if canonical:
            yield out


def _image_realized(image: Sequence[Tuple[str, Tuple[int, ...]]], closure: TypeClosure,
                    s: Schema) -> bool:
    ground = [f for f in image if all(e == 0 for e in f[1])]
    nullish = [f for f in image if any(e != 0 for e in f[1])]
    for rel, entries in set(ground):
        t = FactType(rel, (A_MARK,) * len(entries))
        if t not in closure.reachable:
            return False
    if not nullish:
        return True
    # group facts into components connected by shared nulls
    comps = _null_components(nullish)
    edge_by_src: Dict[FactType, List[TypeEdge]] = {}
    for e in closure.edges:
        edge_by_src.setdefault(e.source, []).append(e)
    for comp in comps:
        if not any(
            _realize_component(root, comp, {}, edge_by_src, frozenset())
            for root in sorted(closure.reachable, key=lambda t: (t.relation, t.pattern))
        ):
            return False
    return True


def _null_components(facts: Sequence[Tuple[str, Tuple[int, ...]]]) -> List[List[Tuple[str, Tuple[int, ...]]]]:
    facts = list(dict.fromkeys(facts))
    comps: List[List[Tuple[str, Tuple[int, ...]]]] = []
    assigned = [False] * len(facts)
    for i in range(len(facts)):
        if assigned[i]:
            continue
        comp = [facts[i]]
        assigned[i] = True
        frontier = [i]
        while frontier:
            j = frontier.pop()
            js = {e for e in facts[j][1] if e != 0}
            for k in range(len(facts)):
                if not assigned[k] and js & {e for e in facts[k][1] if e != 0}:
                    assigned[k] = True
                    comp.append(facts[k])
                    frontier.append(k)
        comps.append(comp)
    return comps


def _match_fact(t: FactType, fact: Tuple[str, Tuple[int, ...]],
                bind: Mapping[int, int]) -> Optional[Dict[int, int]]:
    """Match an image fact against the current node's type.

    `bind` maps image nulls to pattern groups of `t`; a consistent
    extension is returned, or None.  Distinct nulls need distinct groups.
    """
    rel, entries = fact
    if rel != t.relation or len(entries) != len(t.pattern):
        return None
    new = dict(bind)
    used = set(new.values())
    for e, p in zip(entries, t.pattern):
        if e == 0:
            if p != A_MARK:
                return None
        else:
            if p == A_MARK:
                return None
            if e in new:
                if new[e] != p:
                    return None
            else:
                if p in used:
                    return None
                new[e] = p
                used.add(p)
    # groups representing distinct nulls must be distinct
    per_group: Dict[int, int] = {}
    for e, g in new.items():
        if g in per_group and per_group[g] != e:
            return None
        per_group[g] = e
    return new


def _realize_component(
    t: FactType,
    pending: Sequence[Tuple[str, Tuple[int, ...]]],
    bind: Mapping[int, int],
    edge_by_src: Mapping[FactType, List[TypeEdge]],
    trail: FrozenSet[Tuple],
) -> bool:
    """Can the pending facts be realized in the forest subtree below a node
    of type `t`, with `bind` fixing which pattern groups carry which nulls?"""
    if not pending:
        return True
    state = (t, tuple(sorted(bind.items())), tuple(sorted(pending)))
    if state in trail:
        return False  # cycle without progress
    trail = trail | {state}

    options: List[Tuple[Mapping[int, int], List[Tuple[str, Tuple[int, ...]]]]] = []
    # optionally pin unbound nulls to groups of this node's fact (a null
    # shared across children must be live here)
    unbound = [e for f in pending for e in f[1] if e != 0 and e not in bind]
    unbound = list(dict.fromkeys(unbound))
    free_groups = [g for g in t.groups() if g not in bind.values()]
    for k in range(min(len(unbound), len(free_groups)) + 1):
        for nulls_sel in itertools.combinations(unbound, k):
            for groups_sel in itertools.permutations(free_groups, k):
                ext = dict(bind)
                ext.update(zip(nulls_sel, groups_sel))
                options.append((ext, list(pending)))
                for i, fact in enumerate(pending):
                    new_bind = _match_fact(t, fact, ext)
                    if new_bind is not None:
                        rest = list(pending[:i]) + list(pending[i + 1:])
                        options.append((new_bind, rest))

    for cur_bind, rest in options:
        if not rest:
            return True
        # nulls that still occur in pending facts must stay carryable
        live = {e for f in rest for e in f[1] if e != 0}
        if _spread_children(t, rest, cur_bind, live, edge_by_src, trail):
            return True
    return False


def _spread_children(
    t: FactType,
    pending: List[Tuple[str, Tuple[int, ...]]],
    bind: Mapping[int, int],
    live: Set[int],
    edge_by_src: Mapping[FactType, List[TypeEdge]],
    trail: FrozenSet[Tuple],
) -> bool:
    """Distribute pending facts among the node's children (one child per
    outgoing edge; bound nulls survive only along copied groups)."""
    edges = edge_by_src.get(t, [])
    if not edges:
        return False
    if len(pending) == 0:
        return True
    # choose, for each pending fact, which edge's subtree it goes to
    for split in itertools.product(range(len(edges)), repeat=len(pending)):
        ok = True
        by_edge: Dict[int, List[Tuple[str, Tuple[int, ...]]]] = {}
        for f, e_idx in zip(pending, split):
            by_edge.setdefault(e_idx, []).append(f)
        # a null occurring in two different children must be live here
        if len(by_edge) > 1:
            for e1, e2 in itertools.combinations(by_edge, 2):
                n1 = {e for f in by_edge[e1] for e in f[1] if e != 0}
                n2 = {e for f in by_edge[e2] for e in f[1] if e != 0}
                if (n1 & n2) - set(bind):
                    ok = False
                    break
            if not ok:
                continue
        for e_idx, part in by_edge.items():
            edge = edges[e_idx]
            corr = dict(edge.correspondence)
            child_bind: Dict[int, int] = {}
            for null_id, group in bind.items():
                needed = any(null_id in {e for e in f[1] if e != 0} for f in part)
                if group in corr:
                    child_bind[null_id] = corr[group]
                elif needed:
                    ok = False
                    break
            if not ok:
                break
            if not _realize_component(edge.target, part, child_bind, edge_by_src, trail):
                ok = False
                break
        if ok:
            return True
    return False
