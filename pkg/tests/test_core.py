import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dqi.core import (
    Atom,
    CQ,
    CName,
    Const,
    ConstraintSet,
    Fact,
    HeadDisjunct,
    Instance,
    Null,
    RelationDecl,
    Schema,
    SchemaError,
    TGD,
    UCQ,
    Var,
    active_domain,
    apply_hom,
    boolean_cq,
    boolean_ucq,
    canonical_db,
    canonical_query,
    classify,
    critical_instance,
    eval_ucq,
    find_homomorphisms,
    normalize_single_head,
    satisfies,
)
from dqi.core import (
    CONNECTED_TAG,
    CONST_TAG,
    DISJ_TAG,
    EGD_TAG,
    FGTGD_TAG,
    ID_TAG,
    LINEAR_TAG,
)
from dqi.problemgen import random_id_problem, random_visible_instance, random_schema


def simple_schema():
    return Schema((
        RelationDecl("R", 2, True),
        RelationDecl("S", 1, True),
        RelationDecl("H", 2, False),
    ))


def inst(s, *facts):
    return Instance(s, frozenset(facts))


# ---------------------------------------------------------------------------
# query evaluation


def test_eval_ucq_true_and_open():
    s = simple_schema()
    i = inst(s, Fact("R", (Const("a"), Const("b"))), Fact("S", (Const("a"),)))
    q_hit = boolean_ucq([Atom("R", (Var("x"), Var("y"))), Atom("S", (Var("x"),))])
    q_miss = boolean_ucq([Atom("R", (Var("x"), Var("x"))),])
    assert eval_ucq(q_hit, i) is True
    assert eval_ucq(q_miss, i) is False


def test_eval_ucq_union_takes_any_disjunct():
    s = simple_schema()
    i = inst(s, Fact("S", (Const("a"),)))
    q = boolean_ucq([Atom("R", (Var("x"), Var("y")))], [Atom("S", (Var("z"),))])
    assert eval_ucq(q, i) is True


def test_eval_ucq_constant_must_match():
    s = simple_schema()
    i = inst(s, Fact("S", (Const("a"),)))
    assert eval_ucq(boolean_ucq([Atom("S", (CName("a"),))]), i) is True
    assert eval_ucq(boolean_ucq([Atom("S", (CName("b"),))]), i) is False


def test_cq_rejects_unused_free_variable():
    with pytest.raises(SchemaError):
        CQ((Var("x"),), (), (Atom("S", (Var("y"),)),))


# ---------------------------------------------------------------------------
# homomorphisms


def test_find_homomorphisms_enumerates_all():
    s = simple_schema()
    i = inst(s, Fact("R", (Const("a"), Const("b"))), Fact("R", (Const("b"), Const("b"))))
    homs = list(find_homomorphisms((Atom("R", (Var("x"), Var("y"))),), i))
    assert len(homs) == 2
    assert {(h[Var("x")], h[Var("y")]) for h in homs} == {
        (Const("a"), Const("b")),
        (Const("b"), Const("b")),
    }


def test_find_homomorphisms_repeated_variable():
    s = simple_schema()
    i = inst(s, Fact("R", (Const("a"), Const("b"))), Fact("R", (Const("b"), Const("b"))))
    homs = list(find_homomorphisms((Atom("R", (Var("x"), Var("x"))),), i))
    assert [h[Var("x")] for h in homs] == [Const("b")]


def test_find_homomorphisms_seed_pins_variable():
    s = simple_schema()
    i = inst(s, Fact("R", (Const("a"), Const("b"))), Fact("R", (Const("b"), Const("b"))))
    homs = list(find_homomorphisms((Atom("R", (Var("x"), Var("y"))),), i,
                                   seed={Var("x"): Const("a")}))
    assert len(homs) == 1 and homs[0][Var("y")] == Const("b")


def test_find_homomorphisms_join_consistency():
    s = simple_schema()
    i = inst(
        s,
        Fact("R", (Const("a"), Const("b"))),
        Fact("S", (Const("b"),)),
        Fact("R", (Const("c"), Const("d"))),
    )
    atoms = (Atom("R", (Var("x"), Var("y"))), Atom("S", (Var("y"),)))
    homs = list(find_homomorphisms(atoms, i))
    assert len(homs) == 1 and homs[0][Var("x")] == Const("a")


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_every_reported_homomorphism_maps_atoms_to_facts(seed):
    rng = random.Random(seed)
    s = random_schema(rng)
    i = random_visible_instance(rng, s, adom=3, density=0.4)
    rel = rng.choice(list(s.relations))
    atoms = (Atom(rel.name, tuple(Var(f"v{k}") for k in range(rel.arity))),)
    for h in find_homomorphisms(atoms, i):
        assert all(f in i.facts for f in apply_hom(atoms, h))


# ---------------------------------------------------------------------------
# constraint satisfaction


def test_satisfies_tgd():
    s = simple_schema()
    t = TGD((Atom("R", (Var("x"), Var("y"))),),
            (HeadDisjunct((), (Atom("S", (Var("x"),)),)),))
    c = ConstraintSet((t,))
    good = inst(s, Fact("R", (Const("a"), Const("b"))), Fact("S", (Const("a"),)))
    bad = inst(s, Fact("R", (Const("a"), Const("b"))))
    assert satisfies(c, good)
    assert not satisfies(c, bad)


def test_satisfies_existential_head():
    s = simple_schema()
    t = TGD((Atom("S", (Var("x"),)),),
            (HeadDisjunct((Var("y"),), (Atom("R", (Var("x"), Var("y"))),)),))
    c = ConstraintSet((t,))
    good = inst(s, Fact("S", (Const("a"),)), Fact("R", (Const("a"), Const("q"))))
    bad = inst(s, Fact("S", (Const("a"),)), Fact("R", (Const("b"), Const("a"))))
    assert satisfies(c, good)
    assert not satisfies(c, bad)


def test_satisfies_disjunctive_head_needs_one_disjunct():
    s = simple_schema()
    t = TGD((Atom("R", (Var("x"), Var("y"))),),
            (HeadDisjunct((), (Atom("S", (Var("x"),)),)),
             HeadDisjunct((), (Atom("S", (Var("y"),)),))))
    c = ConstraintSet((t,))
    assert satisfies(c, inst(s, Fact("R", (Const("a"), Const("b"))), Fact("S", (Const("b"),))))
    assert not satisfies(c, inst(s, Fact("R", (Const("a"), Const("b")))))


# ---------------------------------------------------------------------------
# classification


def test_classify_inclusion_dependencies():
    s = simple_schema()
    c = ConstraintSet((
        TGD((Atom("R", (Var("x"), Var("y"))),),
            (HeadDisjunct((), (Atom("S", (Var("x"),)),)),)),
    ))
    tags = classify(c, s)
    assert ID_TAG in tags and LINEAR_TAG in tags and FGTGD_TAG in tags
    assert DISJ_TAG not in tags and CONST_TAG not in tags and EGD_TAG not in tags


def test_classify_repeated_variable_is_not_id():
    s = simple_schema()
    c = ConstraintSet((
        TGD((Atom("R", (Var("x"), Var("x"))),),
            (HeadDisjunct((), (Atom("S", (Var("x"),)),)),)),
    ))
    tags = classify(c, s)
    assert ID_TAG not in tags and LINEAR_TAG in tags


def test_classify_constants_and_disjunction():
    s = simple_schema()
    c = ConstraintSet((
        TGD((Atom("S", (CName("a"),)),),
            (HeadDisjunct((), (Atom("S", (CName("a"),)),)),
             HeadDisjunct((), (Atom("R", (CName("a"), CName("a"))),)))),
    ))
    tags = classify(c, s)
    assert CONST_TAG in tags and DISJ_TAG in tags


def test_classify_connected_bodies():
    s = simple_schema()
    connected = ConstraintSet((
        TGD((Atom("R", (Var("x"), Var("y"))), Atom("S", (Var("y"),))),
            (HeadDisjunct((), (Atom("S", (Var("x"),)),)),)),
    ))
    disconnected = ConstraintSet((
        TGD((Atom("S", (Var("x"),)), Atom("S", (Var("y"),))),
            (HeadDisjunct((), (Atom("R", (Var("x"), Var("y"))),)),)),
    ))
    assert CONNECTED_TAG in classify(connected, s)
    assert CONNECTED_TAG not in classify(disconnected, s)


# ---------------------------------------------------------------------------
# canonical structures


def test_canonical_db_and_query_roundtrip():
    s = simple_schema()
    q = boolean_cq([Atom("R", (Var("x"), Var("y"))), Atom("S", (Var("x"),))])
    db = canonical_db(q, s)
    assert len(db.facts) == 2
    back = canonical_query(db)
    i = inst(s, Fact("R", (Const("a"), Const("b"))), Fact("S", (Const("a"),)))
    assert eval_ucq(UCQ((back,)), i) is True


def test_critical_instance_covers_visible_relations_only():
    s = simple_schema()
    crit = critical_instance(s, Const("a"))
    assert crit.facts == frozenset({
        Fact("R", (Const("a"), Const("a"))),
        Fact("S", (Const("a"),)),
    })


def test_normalize_single_head_preserves_models():
    s = simple_schema()
    # R(x,y) -> exists z. H(x,z) & S(x): a two-atom head to split
    t = TGD((Atom("R", (Var("x"), Var("y"))),),
            (HeadDisjunct((Var("z"),), (Atom("H", (Var("x"), Var("z"))),
                                        Atom("S", (Var("x"),)))),))
    c0, s0 = normalize_single_head(ConstraintSet((t,)), s)
    assert all(len(h.atoms) == 1 for d in c0.tgds for h in d.heads)
    aux = [r for r in s0.relations if r.name not in s.by_name]
    assert len(aux) == 1 and not aux[0].visible
    # a model of the normalized set restricted to the source schema is a
    # model of the original constraint
    base = inst(s, Fact("R", (Const("a"), Const("b"))),
                Fact("H", (Const("a"), Const("w"))), Fact("S", (Const("a"),)))
    assert satisfies(ConstraintSet((t,)), base)
    for lifted_facts in _aux_liftings(base, aux[0]):
        lifted = Instance(s0, base.facts | lifted_facts)
        if satisfies(c0, lifted):
            break
    else:
        raise AssertionError("no lifting of a genuine model satisfies the split set")


def _aux_liftings(base, aux_decl):
    import itertools

    dom = sorted({v.name for f in base.facts for v in f.args if isinstance(v, Const)})
    for tup in itertools.product(dom, repeat=aux_decl.arity):
        yield {Fact(aux_decl.name, tuple(Const(n) for n in tup))}


def test_active_domain_and_instance_helpers():
    s = simple_schema()
    i = inst(s, Fact("R", (Const("a"), Null(1))), Fact("H", (Const("b"), Const("b"))))
    assert active_domain(i) == frozenset({Const("a"), Null(1), Const("b")})
    assert i.visible().facts == frozenset({Fact("R", (Const("a"), Null(1)))})
    assert i.with_facts([Fact("S", (Const("c"),))]).facts_of("S")


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_satisfies_is_invariant_under_single_head_normalization_on_models(seed):
    # any completion found by the brute-force enumerator for the original
    # constraints extends to the normalized schema and vice versa at the
    # level of answers; here we check the cheap direction on random models
    rng = random.Random(seed)
    q, c, s, v = random_id_problem(rng)
    c0, s0 = normalize_single_head(c, s)
    assert {r.name for r in s.relations} <= {r.name for r in s0.relations}
    assert all(len(h.atoms) == 1 for d in c0.tgds for h in d.heads)
