"""Greatest-fixpoint Datalog and the selected-attribute transform.

This module decides negative query implication (NQI) for linear TGDs in
polynomial data time.  The pipeline has three stages:

1. ``enforce_adom_controllability`` rewrites a linear-TGD problem so that a
   counterexample instance exists iff one exists whose values all come from
   the active domain of the visible instance (plus the constants mentioned
   in the input).  Hidden relations are split into copies ``R[I,u]`` that
   record which attribute positions hold active-domain values (``I``) and
   the equality pattern ``u`` of the remaining positions.
2. ``build_gfp_program`` compiles the (controllable) problem into a Datalog
   program whose rules gate every hidden tuple on the active domain and on
   the heads of the constraints it must satisfy.
3. ``eval_gfp`` initialises every intensional relation maximally over the
   active domain plus program constants and descends to the greatest
   fixpoint of the immediate consequence operator.

``nqi_via_gfp`` runs the stages, then shrinks the fixpoint to the largest
sub-instance that genuinely satisfies the constraints, which makes the final
answer independent of how tightly the rule bodies approximate the
constraints.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Set, Tuple, Union

from .core import (
    Atom,
    CName,
    ClassError,
    Const,
    ConstraintSet,
    CQ,
    Dependency,
    EGD,
    Fact,
    HeadDisjunct,
    Instance,
    RelationDecl,
    Schema,
    SchemaError,
    TGD,
    UCQ,
    Value,
    Var,
    active_domain,
    apply_hom,
    boolean_cq,
    classify,
    eval_ucq,
    find_homomorphisms,
    normalize_single_head,
    satisfies,
    value_key,
    CONST_TAG,
    DISJ_TAG,
    EGD_TAG,
    ID_TAG,
    LINEAR_TAG,
)

# ---------------------------------------------------------------------------
# equality patterns
#
# A pattern entry is either ("v", k) -- the k-th pattern variable -- or
# ("c", name) -- a named constant.  Patterns are kept canonical: variable
# indices are assigned by first occurrence, starting at 0.

Entry = Tuple[str, object]
Pattern = Tuple[Entry, ...]


def _canon(entries: Sequence[Entry]) -> Pattern:
    """Renumber pattern variables by first occurrence."""
    order: Dict[object, int] = {}
    out: List[Entry] = []
    for e in entries:
        if e[0] == "c":
            out.append(e)
        else:
            if e[1] not in order:
                order[e[1]] = len(order)
            out.append(("v", order[e[1]]))
    return tuple(out)


def pattern_of_terms(terms: Sequence[Union[Var, CName]]) -> Pattern:
    """The canonical equality pattern of a term sequence."""
    return _canon(
        [("c", t.name) if isinstance(t, CName) else ("v", t) for t in terms]
    )


def pattern_of_values(values: Sequence[Value], pool: FrozenSet[str]) -> Pattern:
    """Equality pattern of a value tuple; constants in `pool` stay named."""
    entries: List[Entry] = []
    for v in values:
        if isinstance(v, Const) and v.name in pool:
            entries.append(("c", v.name))
        else:
            entries.append(("v", v))
    return _canon(entries)


def canonical_patterns(n: int, constants: Sequence[str]) -> List[Pattern]:
    """All canonical equality patterns of length n over the constant pool."""
    consts = sorted(set(constants))
    out: List[Pattern] = []

    def rec(prefix: List[Entry], used_vars: int) -> None:
        if len(prefix) == n:
            out.append(tuple(prefix))
            return
        for k in range(used_vars):
            rec(prefix + [("v", k)], used_vars)
        rec(prefix + [("v", used_vars)], used_vars + 1)
        for c in consts:
            rec(prefix + [("c", c)], used_vars)

    rec([], 0)
    return out


def pattern_var_count(p: Pattern) -> int:
    return len({e[1] for e in p if e[0] == "v"})


# ---------------------------------------------------------------------------
# hidden-relation copies


@dataclass(frozen=True)
class CopyRelation:
    """A copy of a hidden relation keeping positions `selected` and recalling
    the equality pattern of the dropped positions."""

    source: str
    source_arity: int
    selected: Tuple[int, ...]  # 0-based positions, sorted
    pattern: Pattern  # indexed by the complement of `selected`
    name: str

    @property
    def dropped(self) -> Tuple[int, ...]:
        sel = set(self.selected)
        return tuple(i for i in range(self.source_arity) if i not in sel)


class TransformTooLarge(ClassError):
    """The selected-attribute transform would exceed the configured size."""


@dataclass(frozen=True)
class AdomTransform:
    """The output of the selected-attribute transform, with enough structure
    to map counterexample instances back to the source schema."""

    query: UCQ
    constraints: ConstraintSet
    schema: Schema
    source_schema: Schema
    copies: Tuple[CopyRelation, ...]
    # copy atoms that cannot hold any fact in a reconstructible instance:
    # their constraints lose a value that a visible fact would have to carry
    forced_empty: Tuple[Atom, ...]

    @property
    def copy_by_name(self) -> Dict[str, CopyRelation]:
        return {c.name: c for c in self.copies}

    def fresh_pool(self, avoid: Iterable[Value]) -> Tuple[Const, ...]:
        """Fresh constants used to re-inflate dropped positions."""
        k = max((r.arity for r in self.source_schema.relations), default=0)
        taken = {v.name for v in avoid if isinstance(v, Const)}
        taken.update(
            e[1] for cp in self.copies for e in cp.pattern if e[0] == "c"
        )
        pool: List[Const] = []
        i = 0
        while len(pool) < k:
            cand = f"!f{i}"
            i += 1
            if cand not in taken:
                pool.append(Const(cand))
        return tuple(pool)

    def reconstruct(self, transformed: Instance) -> Instance:
        """Map an instance over the transformed schema back to the source
        schema, re-inflating every copy fact with all injective assignments
        of its pattern variables to fresh constants."""
        pool = self.fresh_pool(active_domain(transformed))
        by_name = self.copy_by_name
        facts: Set[Fact] = set()
        source_rels = set(self.source_schema.by_name)
        for f in transformed.sorted_facts():
            if f.relation in source_rels:
                facts.add(f)
                continue
            copy = by_name.get(f.relation)
            if copy is None:
                continue
            nvars = pattern_var_count(copy.pattern)
            for combo in itertools.permutations(pool, nvars):
                args: List[Optional[Value]] = [None] * copy.source_arity
                for pos, v in zip(copy.selected, f.args):
                    args[pos] = v
                for pos, e in zip(copy.dropped, copy.pattern):
                    args[pos] = Const(e[1]) if e[0] == "c" else combo[e[1]]
                facts.add(Fact(copy.source, tuple(args)))  # type: ignore[arg-type]
        return Instance(self.source_schema, frozenset(facts))


def _require_plain_linear(
    c: ConstraintSet, s: Schema, allow_disjunctive: bool = False
) -> None:
    tags = classify(c, s)
    if EGD_TAG in tags:
        raise ClassError("equality constraints are outside the linear-TGD method")
    if DISJ_TAG in tags and not allow_disjunctive:
        raise ClassError("disjunctive heads are outside the linear-TGD method")
    if LINEAR_TAG not in tags:
        raise ClassError("constraints must be linear TGDs (single body atom)")


def _constant_pool(c: ConstraintSet, q: UCQ) -> List[str]:
    names: Set[str] = set()
    for dep in c.dependencies:
        atoms: List[Atom] = list(dep.body)
        if isinstance(dep, TGD):
            for h in dep.heads:
                atoms.extend(h.atoms)
        else:
            for t in (dep.left, dep.right):
                if isinstance(t, CName):
                    names.add(t.name)
        for a in atoms:
            names.update(t.name for t in a.args if isinstance(t, CName))
    for d in q.disjuncts:
        for a in d.atoms:
            names.update(t.name for t in a.args if isinstance(t, CName))
    return sorted(names)


def _copy_name(base: str, idx: int, taken: Set[str]) -> str:
    name = f"{base}_c{idx}"
    while name in taken:
        name = "_" + name
    taken.add(name)
    return name


def _unify_dropped(
    terms: Sequence[Union[Var, CName]],
    pattern: Pattern,
    selected_vars: Set[Var],
) -> Optional[Dict[Var, Union[Var, CName, Entry]]]:
    """Match the dropped body positions of an atom against a copy pattern.

    Returns a substitution for the atom's variables, or None when no sound
    translation exists.  A variable bound to a pattern variable is recorded
    as the entry itself; variables sharing an entry are unified later.
    Soundness requirement: every fact admitted by the pattern and matching
    the selected positions must satisfy the original atom, so each term's
    dropped occurrences must pin down a single entry, constants must appear
    literally, and a variable cannot live on both sides of the split.
    """
    entry_of: Dict[Union[Var, CName], Entry] = {}
    for t, e in zip(terms, pattern):
        if isinstance(t, CName):
            if e != ("c", t.name):
                return None
        else:
            if t in entry_of and entry_of[t] != e:
                return None
            entry_of[t] = e
    subst: Dict[Var, Union[Var, CName, Entry]] = {}
    rep_for_entry: Dict[Entry, Var] = {}
    for t, e in entry_of.items():
        assert isinstance(t, Var)
        if e[0] == "c":
            subst[t] = CName(e[1])
        else:
            if t in selected_vars:
                return None
            rep = rep_for_entry.setdefault(e, t)
            subst[t] = rep
    return subst


def _apply_subst(atom: Atom, subst: Mapping[Var, Union[Var, CName]]) -> Atom:
    return Atom(
        atom.relation,
        tuple(subst.get(t, t) if isinstance(t, Var) else t for t in atom.args),
    )


def transform_adom(
    q: UCQ,
    c: ConstraintSet,
    s: Schema,
    max_copies: int = 20000,
    max_constraints: int = 200000,
) -> AdomTransform:
    """Rewrite a linear-TGD problem into an equivalent one whose negative
    query implication always has an active-domain counterexample when it has
    any counterexample at all."""
    _require_plain_linear(c, s)
    if q.free_vars:
        raise ClassError("the transform expects a Boolean query")
    c, s = normalize_single_head(c, s)
    pool = _constant_pool(c, q)
    taken = set(s.by_name)

    # copies of every hidden relation, one per (selected set, pattern)
    copies: List[CopyRelation] = []
    copies_of: Dict[str, List[CopyRelation]] = {}
    for rel in s.hidden_relations:
        per_rel: List[CopyRelation] = []
        idx = 0
        positions = list(range(rel.arity))
        for r in range(rel.arity, -1, -1):
            for sel in itertools.combinations(positions, r):
                for pat in canonical_patterns(rel.arity - len(sel), pool):
                    name = _copy_name(rel.name, idx, taken)
                    idx += 1
                    per_rel.append(
                        CopyRelation(rel.name, rel.arity, sel, pat, name)
                    )
        copies.extend(per_rel)
        copies_of[rel.name] = per_rel
        if len(copies) > max_copies:
            raise TransformTooLarge(
                f"too many relation copies ({len(copies)}); "
                "lower the hidden arities or constant count"
            )

    new_schema = Schema(
        tuple(s.visible_relations)
        + tuple(
            RelationDecl(cp.name, len(cp.selected), visible=False) for cp in copies
        )
    )

    # translate each TGD once per body copy
    deps: List[Dependency] = []
    forced_empty: List[Atom] = []

    def head_translation(
        head_atom: Atom,
        exist_vars: Tuple[Var, ...],
        subst: Dict[Var, Union[Var, CName]],
        selected_vars: Set[Var],
    ) -> Optional[List[HeadDisjunct]]:
        """Translate a head atom given the body substitution.

        Returns the list of admissible head disjuncts, or None when the copy
        holding the body fact can never appear in a reconstructible instance
        (a visible head would need a value that the copy dropped).  For
        hidden heads every keep-or-drop choice of the existential variables
        is a disjunct: a witness may place the existential value inside or
        outside the active domain, and each choice is sound on its own.
        """
        z = tuple(
            subst.get(t, t) if isinstance(t, Var) else t for t in head_atom.args
        )
        decl = s.decl(head_atom.relation)
        z_vars = {t for t in z if isinstance(t, Var)}
        exist_here = tuple(v for v in exist_vars if v in z_vars)
        if decl.visible:
            # dropped body variables cannot reach a visible fact
            for t in z:
                if isinstance(t, Var) and t not in exist_vars and t not in selected_vars:
                    return None
            return [HeadDisjunct(exist_here, (Atom(head_atom.relation, z),))]
        out: List[HeadDisjunct] = []
        for r in range(len(exist_here) + 1):
            for kept_exist in itertools.combinations(exist_here, r):
                keep = tuple(
                    j
                    for j, t in enumerate(z)
                    if isinstance(t, Var)
                    and (t in selected_vars or t in kept_exist)
                )
                dropped = [z[j] for j in range(len(z)) if j not in set(keep)]
                pat = pattern_of_terms(dropped)
                target = next(
                    cp
                    for cp in copies_of[head_atom.relation]
                    if cp.selected == keep and cp.pattern == pat
                )
                atom = Atom(target.name, tuple(z[j] for j in keep))
                disjunct = HeadDisjunct(
                    tuple(v for v in kept_exist if any(t == v for t in atom.args)),
                    (atom,),
                )
                if disjunct not in out:
                    out.append(disjunct)
        return out

    for tgd in c.tgds:
        body = tgd.body[0]
        head = tgd.heads[0]
        head_atom = head.atoms[0]
        body_decl = s.decl(body.relation)
        body_copies: List[Tuple[Atom, Dict[Var, Union[Var, CName]]]] = []
        if body_decl.visible:
            body_copies.append((body, {}))
        else:
            for cp in copies_of[body.relation]:
                sel_terms = tuple(body.args[i] for i in cp.selected)
                selected_vars = {t for t in sel_terms if isinstance(t, Var)}
                dropped_terms = tuple(body.args[i] for i in cp.dropped)
                raw = _unify_dropped(dropped_terms, cp.pattern, selected_vars)
                if raw is None:
                    continue
                subst = {v: w for v, w in raw.items() if not isinstance(w, tuple)}
                new_body = Atom(
                    cp.name,
                    tuple(
                        subst.get(t, t) if isinstance(t, Var) else t
                        for t in sel_terms
                    ),
                )
                body_copies.append((new_body, subst))
        for new_body, subst in body_copies:
            selected_vars = {t for t in new_body.args if isinstance(t, Var)}
            disjuncts = head_translation(
                head_atom, tuple(head.exist_vars), subst, selected_vars
            )
            if disjuncts is None:
                forced_empty.append(new_body)
                continue
            deps.append(TGD((new_body,), tuple(disjuncts)))
            if len(deps) > max_constraints:
                raise TransformTooLarge("too many translated constraints")

    # translate each query disjunct once per compatible choice of copies
    new_disjuncts: List[CQ] = []
    for d in q.disjuncts:
        choices_per_atom: List[List[Tuple[Atom, Dict[Var, object]]]] = []
        for a in d.atoms:
            decl = s.decl(a.relation)
            opts: List[Tuple[Atom, Dict[Var, object]]] = []
            if decl.visible:
                opts.append((a, {t: "sel" for t in a.args if isinstance(t, Var)}))
            else:
                for cp in copies_of[a.relation]:
                    sel_terms = tuple(a.args[i] for i in cp.selected)
                    dropped_terms = tuple(a.args[i] for i in cp.dropped)
                    entry_of: Dict[Union[Var, CName], Entry] = {}
                    bad = False
                    for t, e in zip(dropped_terms, cp.pattern):
                        if isinstance(t, CName):
                            if e != ("c", t.name):
                                bad = True
                                break
                        elif t in entry_of and entry_of[t] != e:
                            bad = True
                            break
                        else:
                            entry_of[t] = e
                    if bad:
                        continue
                    marks: Dict[Var, object] = {}
                    for t in sel_terms:
                        if isinstance(t, Var):
                            marks[t] = "sel"
                    ok = True
                    for t, e in entry_of.items():
                        assert isinstance(t, Var)
                        if t in marks and marks[t] == "sel":
                            ok = False  # split within one atom
                            break
                        marks[t] = ("c", e[1]) if e[0] == "c" else "pat"
                    if not ok:
                        continue
                    opts.append((Atom(cp.name, sel_terms), marks))
            choices_per_atom.append(opts)
        for combo in itertools.product(*choices_per_atom):
            # a variable shared between atoms must be consistently either
            # kept (joins survive) or dropped in all of them; a constant
            # binding must agree everywhere
            global_marks: Dict[Var, object] = {}
            ok = True
            for _, marks in combo:
                for v, m in marks.items():
                    prev = global_marks.get(v)
                    if prev is None:
                        global_marks[v] = m
                    elif prev == m:
                        continue
                    elif prev == "pat" and m == "pat":
                        continue
                    else:
                        ok = False
                        break
                if not ok:
                    break
            if not ok:
                continue
            subst: Dict[Var, CName] = {
                v: CName(m[1])
                for v, m in global_marks.items()
                if isinstance(m, tuple)
            }
            atoms = tuple(_apply_subst(a, subst) for a, _ in combo)
            cq = boolean_cq(atoms)
            if cq not in new_disjuncts:
                new_disjuncts.append(cq)
            if len(new_disjuncts) > max_constraints:
                raise TransformTooLarge("too many translated query disjuncts")

    # the all-kept choice always survives validation, so the union is never empty
    assert new_disjuncts

    return AdomTransform(
        query=UCQ(tuple(new_disjuncts)),
        constraints=ConstraintSet(tuple(deps)),
        schema=new_schema,
        source_schema=s,
        copies=tuple(copies),
        forced_empty=tuple(forced_empty),
    )


def enforce_adom_controllability(
    q: UCQ, c: ConstraintSet, s: Schema
) -> Tuple[UCQ, ConstraintSet, Schema]:
    """Selected-attribute rewriting of a linear-TGD problem; see
    ``transform_adom`` for the full machinery."""
    tr = transform_adom(q, c, s)
    return tr.query, tr.constraints, tr.schema


# ---------------------------------------------------------------------------
# GFP-Datalog programs


@dataclass(frozen=True)
class DatalogRule:
    head: Atom
    body: Tuple[Atom, ...]

    def __post_init__(self) -> None:
        body_vars = {v for a in self.body for v in a.variables}
        for v in self.head.variables:
            if v not in body_vars:
                raise SchemaError(f"unsafe rule head variable {v.name}")


@dataclass(frozen=True)
class GFPProgram:
    extensional: FrozenSet[str]
    intensional: FrozenSet[str]
    arities: Tuple[Tuple[str, int], ...]
    rules: Tuple[DatalogRule, ...]
    constants: FrozenSet[str]
    goal: str

    def __post_init__(self) -> None:
        arity = dict(self.arities)
        if self.goal not in self.intensional:
            raise SchemaError("goal relation must be intensional")
        for r in self.rules:
            if r.head.relation not in self.intensional:
                raise SchemaError(f"rule head {r.head.relation} is not intensional")
            for a in (r.head,) + r.body:
                if a.relation not in arity:
                    raise SchemaError(f"undeclared relation {a.relation}")
                if arity[a.relation] != len(a.args):
                    raise SchemaError(f"arity mismatch for {a.relation}")

    @property
    def arity(self) -> Dict[str, int]:
        return dict(self.arities)


def _term_text(t: Union[Var, CName]) -> str:
    return t.name if isinstance(t, Var) else f'"{t.name}"'


def _atom_text(a: Atom) -> str:
    if not a.args:
        return f"{a.relation}()"
    return f"{a.relation}({', '.join(_term_text(t) for t in a.args)})"


def program_text(p: GFPProgram) -> str:
    """Readable Datalog form: header lines, then one rule per line."""
    lines = [
        "% extensional: " + ", ".join(sorted(p.extensional)),
        "% intensional: " + ", ".join(sorted(p.intensional)),
        "% goal: " + p.goal,
    ]
    for r in p.rules:
        if r.body:
            lines.append(
                f"{_atom_text(r.head)} :- " + ", ".join(_atom_text(a) for a in r.body) + "."
            )
        else:
            lines.append(f"{_atom_text(r.head)}.")
    return "\n".join(lines) + "\n"


def _fresh_name(base: str, taken: Set[str]) -> str:
    name = base
    while name in taken:
        name = "_" + name
    taken.add(name)
    return name


def build_gfp_program(
    q: UCQ, c: ConstraintSet, s: Schema, extra_constants: Sequence[str] = ()
) -> GFPProgram:
    """Compile an NQI problem over linear TGDs into a GFP-Datalog program.

    Extensional relations are the visible ones.  A unary relation collects
    the active domain and the program constants; every hidden tuple is gated
    on it and on the heads of the constraints whose body it matches.  The
    goal relation fires on the query disjuncts.
    """
    _require_plain_linear(c, s, allow_disjunctive=True)
    if q.free_vars:
        raise ClassError("GFP compilation expects a Boolean query")
    c, s = normalize_single_head(c, s)
    taken = set(s.by_name)
    a_name = _fresh_name("A", taken)
    goal_name = _fresh_name("Goal", taken)
    constants = sorted(set(_constant_pool(c, q)) | set(extra_constants))

    rules: List[DatalogRule] = []
    # the active-domain relation: every position of every visible fact,
    # plus each constant of the problem
    for rel in s.visible_relations:
        args = tuple(Var(f"x{i}") for i in range(rel.arity))
        for i in range(rel.arity):
            rules.append(DatalogRule(Atom(a_name, (args[i],)), (Atom(rel.name, args),)))
    for name in constants:
        rules.append(DatalogRule(Atom(a_name, (CName(name),)), ()))

    # hidden relations: one rule per body shape a constraint distinguishes
    tgds_by_rel: Dict[str, List[TGD]] = {}
    for t in c.tgds:
        tgds_by_rel.setdefault(t.body[0].relation, []).append(t)
    exist_counter = itertools.count(1)
    for rel in s.hidden_relations:
        shapes: List[Pattern] = [
            tuple(("v", ("g", i)) for i in range(rel.arity))  # generic shape
        ]
        for t in tgds_by_rel.get(rel.name, ()):
            pat = pattern_of_terms(t.body[0].args)
            if _canon(pat) not in [_canon(sh) for sh in shapes]:
                shapes.append(pat)
        for shape in shapes:
            shape = _canon(shape)
            head_args: List[Union[Var, CName]] = [
                CName(e[1]) if e[0] == "c" else Var(f"w{e[1]}") for e in shape
            ]
            head = Atom(rel.name, tuple(head_args))
            body: List[Atom] = []
            for t in dict.fromkeys(head_args):
                body.append(Atom(a_name, (t,)))
            for t in tgds_by_rel.get(rel.name, ()):
                # does every tuple of this shape trigger the constraint?
                m: Dict[Var, Union[Var, CName]] = {}
                fits = True
                for bt, ha in zip(t.body[0].args, head_args):
                    if isinstance(bt, CName):
                        if not (isinstance(ha, CName) and ha.name == bt.name):
                            fits = False
                            break
                    elif bt in m:
                        if m[bt] != ha:
                            fits = False
                            break
                    else:
                        m[bt] = ha
                if not fits:
                    continue
                if len(t.heads) > 1:
                    # a disjunctive obligation cannot become a conjunct; the
                    # shrink pass enforces it instead
                    continue
                disjunct = t.heads[0]
                ren = {
                    y: Var(f"e{next(exist_counter)}_{y.name}")
                    for y in disjunct.exist_vars
                }
                # rename the existentials apart before pinning the body
                # variables, so a head variable can never capture a shape one
                for ha in disjunct.atoms:
                    body.append(_apply_subst(_apply_subst(ha, ren), m))
            rules.append(DatalogRule(head, tuple(body)))

    for d in q.disjuncts:
        rules.append(DatalogRule(Atom(goal_name, ()), tuple(d.atoms)))

    arities = tuple(
        sorted(
            [(r.name, r.arity) for r in s.relations]
            + [(a_name, 1), (goal_name, 0)]
        )
    )
    return GFPProgram(
        extensional=frozenset(r.name for r in s.visible_relations),
        intensional=frozenset(
            [r.name for r in s.hidden_relations] + [a_name, goal_name]
        ),
        arities=arities,
        rules=tuple(rules),
        constants=frozenset(constants),
        goal=goal_name,
    )


def eval_gfp(p: GFPProgram, ext: Instance) -> Tuple[bool, Instance]:
    """Descend from the maximal intensional database to the greatest
    fixpoint of the immediate consequence operator."""
    for f in ext.facts:
        if f.relation not in p.extensional:
            raise SchemaError(f"{f.relation} is not extensional")
    arity = p.arity
    domain = sorted(
        set(active_domain(ext)) | {Const(n) for n in p.constants}, key=value_key
    )
    current: Dict[str, Set[Tuple[Value, ...]]] = {
        name: {f.args for f in ext.facts_of(name)} for name in p.extensional
    }
    domain_set = set(domain)
    intensional = set(p.intensional)

    # First descent step, taken symbolically: against the maximal
    # intensional database an intensional body atom is satisfied by every
    # domain assignment, so only the extensional atoms constrain the match
    # and unpinned head variables range over the whole domain.  This avoids
    # ever materialising the |domain|^arity cross products.
    ext_fact_list = [
        Fact(name, args) for name in p.extensional for args in current[name]
    ]
    for name in p.intensional:
        current[name] = set()
    for r in p.rules:
        if r.head.relation not in intensional:
            continue
        ext_atoms = tuple(a for a in r.body if a.relation not in intensional)
        int_atoms = tuple(a for a in r.body if a.relation in intensional)
        feasible = True
        for a in int_atoms:
            for t in a.args:
                if isinstance(t, CName):
                    if Const(t.name) not in domain_set:
                        feasible = False
                elif not domain:
                    feasible = False
        if not feasible:
            continue
        head_vars = [t for t in r.head.args if isinstance(t, Var)]
        for h in find_homomorphisms(ext_atoms, ext_fact_list):
            free = [x for x in dict.fromkeys(head_vars) if x not in h]
            for combo in itertools.product(domain, repeat=len(free)):
                m = dict(h)
                m.update(zip(free, combo))
                args = apply_hom((r.head,), m)[0].args
                if all(v in domain_set for v in args):
                    current[r.head.relation].add(args)

    rules_by_head: Dict[str, List[DatalogRule]] = {}
    for r in p.rules:
        rules_by_head.setdefault(r.head.relation, []).append(r)

    def db_facts() -> List[Fact]:
        return [
            Fact(name, args) for name, tuples in current.items() for args in tuples
        ]

    while True:
        facts = db_facts()
        new: Dict[str, Set[Tuple[Value, ...]]] = {}
        for name in p.intensional:
            derived: Set[Tuple[Value, ...]] = set()
            for r in rules_by_head.get(name, ()):
                for h in find_homomorphisms(r.body, facts):
                    derived.add(apply_hom((r.head,), h)[0].args)
            new[name] = derived & current[name]
        if all(new[name] == current[name] for name in p.intensional):
            break
        for name in p.intensional:
            current[name] = new[name]

    decls = [RelationDecl(n, a, visible=(n in p.extensional)) for n, a in p.arities]
    fixpoint = Instance(Schema(tuple(decls)), frozenset(db_facts()))
    goal_true = bool(current[p.goal])
    return goal_true, fixpoint


# ---------------------------------------------------------------------------
# the NQI decision pipeline


def _largest_model(
    q: UCQ,
    c: ConstraintSet,
    s: Schema,
    v: Instance,
    forced_empty: Sequence[Atom] = (),
    extra_constants: Sequence[str] = (),
) -> Optional[Instance]:
    """Run the GFP program, then shrink the fixpoint to the largest
    sub-instance with visible part `v` that satisfies every constraint.
    Returns None when no such instance satisfies the query."""
    program = build_gfp_program(q, c, s, extra_constants=extra_constants)
    # recheck after normalisation inside the builder
    c, s = normalize_single_head(c, s)
    _, fixpoint = eval_gfp(program, v)
    hidden_names = {r.name for r in s.hidden_relations}
    hidden = {f for f in fixpoint.facts if f.relation in hidden_names}

    def current() -> Instance:
        return Instance(s, frozenset(hidden) | v.facts)

    changed = True
    while changed:
        changed = False
        inst = current()
        for atom in forced_empty:
            for h in find_homomorphisms((atom,), inst):
                bad = apply_hom((atom,), h)[0]
                if bad in hidden:
                    hidden.discard(bad)
                    changed = True
        if changed:
            continue
        for tgd in c.tgds:
            body = tgd.body[0]
            for h in find_homomorphisms((body,), inst):
                fact = apply_hom((body,), h)[0]
                satisfied = False
                for disjunct in tgd.heads:
                    seed = {
                        var: val
                        for var, val in h.items()
                        if var not in disjunct.exist_vars
                    }
                    if any(
                        True
                        for _ in find_homomorphisms(disjunct.atoms, inst, seed=seed)
                    ):
                        satisfied = True
                        break
                if satisfied:
                    continue
                if fact in hidden:
                    hidden.discard(fact)
                    changed = True
                else:
                    # a visible fact demands a head no instance can supply
                    return None
            if changed:
                break

    inst = current()
    if not (eval_ucq(q, inst) and satisfies(c, inst)):
        return None
    return inst


def nqi_gfp_detail(
    q: UCQ, c: ConstraintSet, s: Schema, v: Instance
) -> Tuple[bool, Optional[Instance]]:
    """NQI for linear TGDs, with a counterexample over the source schema
    when the answer is negative."""
    _require_plain_linear(c, s)
    if q.free_vars:
        raise ClassError("NQI expects a Boolean query")
    # one spare value keeps the collapse argument sound on an empty domain
    extra: Tuple[str, ...] = tuple(_constant_pool(c, q))
    if not extra and not active_domain(v):
        extra = ("!d0",)
    # multi-atom heads normalise away, so judge the fragment afterwards:
    # a head like R(x,y) ∧ S(y,z) is an inclusion-dependency set once split
    c0, s0 = normalize_single_head(c, s)
    tags = classify(c0, s0)
    if ID_TAG in tags and CONST_TAG not in tags:
        v0 = Instance(s0, v.facts)
        model = _largest_model(q, c0, s0, v0, extra_constants=extra)
        if model is None:
            return True, None
        keep = set(s.by_name)
        witness = Instance(
            s, frozenset(f for f in model.facts if f.relation in keep)
        )
        return False, witness
    tr = transform_adom(q, c, s)
    v1 = Instance(tr.schema, v.facts)
    model = _largest_model(
        tr.query,
        tr.constraints,
        tr.schema,
        v1,
        forced_empty=tr.forced_empty,
        extra_constants=extra,
    )
    if model is None:
        return True, None
    witness = tr.reconstruct(model)
    keep = set(s.by_name)
    witness = Instance(s, frozenset(f for f in witness.facts if f.relation in keep))
    return False, witness


def nqi_via_gfp(q: UCQ, c: ConstraintSet, s: Schema, v: Instance) -> bool:
    """Does every instance with visible part `v` satisfying `c` falsify `q`?"""
    answer, _ = nqi_gfp_detail(q, c, s, v)
    return answer
