"""The `.dqi` problem description language and first-order formula emission.

A `.dqi` file starts with a `dqi-1` header line and holds one schema,
one constraints block, and any number of named queries and instances:

    dqi-1
    schema { visible F1/1; visible F2/1; hidden U/2; }
    constraints {
      F1(x) -> exists y. U(x,y);
      U(x,y) -> F2(y);
      R(x,x) -> T();
      U(x,y) & U(x,z) -> y = z;
      A(x) -> B(x) | C(x);
    }
    query Q { exists x. U(x,x) }
    instance V { F1(a). F2(a). }

Inside formulas a lowercase identifier is a variable and constants are
quoted (`"Smith"`); inside instance blocks every argument is a constant
(bare or quoted) or a null written `?7`.  `#` starts a line comment.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .core import (
    Atom,
    CName,
    CQ,
    Const,
    ConstraintSet,
    Dependency,
    EGD,
    Fact,
    HeadDisjunct,
    Instance,
    Null,
    RelationDecl,
    Schema,
    SchemaError,
    TGD,
    Term,
    UCQ,
    Value,
    Var,
    fact_key,
)

HEADER = "dqi-1"

_PLAIN_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*$")
_LOWER_NAME = re.compile(r"[a-z][A-Za-z0-9_]*$")


class ParseError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


@dataclass(frozen=True)
class ProblemFile:
    schema: Schema
    constraints: ConstraintSet
    queries: Dict[str, UCQ] = field(default_factory=dict)
    instances: Dict[str, Instance] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# tokenizer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>\#[^\n]*)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<null>\?\d+)
  | (?P<name>[A-Za-z_!][A-Za-z0-9_']*)
  | (?P<int>\d+)
  | (?P<arrow>->)
  | (?P<punct>[{}();,./|&=])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> List[_Tok]:
    toks: List[_Tok] = []
    line, col, pos = 1, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup or ""
        raw = m.group()
        if kind not in ("ws", "comment"):
            toks.append(_Tok(kind, raw, line, col))
        newlines = raw.count("\n")
        if newlines:
            line += newlines
            col = len(raw) - raw.rfind("\n")
        else:
            col += len(raw)
        pos = m.end()
    return toks


class _Parser:
    def __init__(self, toks: List[_Tok]):
        self.toks = toks
        self.pos = 0

    def peek(self) -> Optional[_Tok]:
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def next(self) -> _Tok:
        t = self.peek()
        if t is None:
            last = self.toks[-1] if self.toks else _Tok("", "", 1, 1)
            raise ParseError("unexpected end of input", last.line, last.col)
        self.pos += 1
        return t

    def expect(self, text: str) -> _Tok:
        t = self.next()
        if t.text != text:
            raise ParseError(f"expected {text!r}, found {t.text!r}", t.line, t.col)
        return t

    def at(self, text: str) -> bool:
        t = self.peek()
        return t is not None and t.text == text

    def error(self, msg: str) -> ParseError:
        t = self.peek() or (self.toks[-1] if self.toks else _Tok("", "", 1, 1))
        return ParseError(msg, t.line, t.col)


# ---------------------------------------------------------------------------
# parsing


def parse(text: str) -> ProblemFile:
    """Parse a `.dqi` document."""
    lines = text.split("\n")
    header_at = None
    for i, ln in enumerate(lines):
        stripped = ln.split("#", 1)[0].strip()
        if not stripped:
            continue
        if stripped == HEADER:
            header_at = i
        break
    if header_at is None:
        raise ParseError(f"missing {HEADER} header", 1, 1)
    lines[header_at] = ""
    toks = _tokenize("\n".join(lines))
    p = _Parser(toks)
    schema = Schema(())
    deps: List[Dependency] = []
    queries: Dict[str, UCQ] = {}
    raw_instances: List[Tuple[str, List[Tuple[str, List[Value], _Tok]]]] = []
    seen_schema = False
    while p.peek() is not None:
        kw = p.next()
        if kw.text == "schema":
            if seen_schema:
                raise ParseError("duplicate schema section", kw.line, kw.col)
            schema = _parse_schema(p)
            seen_schema = True
        elif kw.text == "constraints":
            deps.extend(_parse_constraints(p))
        elif kw.text == "query":
            name = p.next().text
            if name in queries:
                raise ParseError(f"duplicate query {name}", kw.line, kw.col)
            queries[name] = _parse_query(p)
        elif kw.text == "instance":
            name = p.next().text
            raw_instances.append((name, _parse_instance_block(p)))
        else:
            raise ParseError(f"unknown section {kw.text!r}", kw.line, kw.col)
    _check_constraints(schema, deps)
    for q in queries.values():
        _check_query(schema, q)
    instances: Dict[str, Instance] = {}
    for name, raw in raw_instances:
        if name in instances:
            raise ParseError(f"duplicate instance {name}", 0, 0)
        facts = set()
        for rel, args, tok in raw:
            decl = schema.by_name.get(rel)
            if decl is None:
                raise ParseError(f"undeclared relation {rel}", tok.line, tok.col)
            if decl.arity != len(args):
                raise ParseError(f"arity mismatch for {rel}", tok.line, tok.col)
            facts.add(Fact(rel, tuple(args)))
        instances[name] = Instance(schema, frozenset(facts))
    return ProblemFile(schema, ConstraintSet(tuple(deps)), queries, instances)


def _parse_schema(p: _Parser) -> Schema:
    p.expect("{")
    decls: List[RelationDecl] = []
    while not p.at("}"):
        vis = p.next()
        if vis.text not in ("visible", "hidden"):
            raise ParseError("expected 'visible' or 'hidden'", vis.line, vis.col)
        name = p.next()
        p.expect("/")
        ar = p.next()
        if ar.kind != "int":
            raise ParseError("expected arity", ar.line, ar.col)
        decls.append(RelationDecl(name.text, int(ar.text), vis.text == "visible"))
        p.expect(";")
    p.expect("}")
    return Schema(tuple(decls))


def _parse_term(p: _Parser) -> Term:
    t = p.next()
    if t.kind == "string":
        return CName(_unquote(t.text))
    if t.kind == "name":
        if _LOWER_NAME.match(t.text):
            return Var(t.text)
        return CName(t.text)
    raise ParseError(f"expected term, found {t.text!r}", t.line, t.col)


def _parse_atom(p: _Parser, head_name: Optional[str] = None) -> Atom:
    name = p.next() if head_name is None else None
    rel = head_name if head_name is not None else name.text  # type: ignore[union-attr]
    p.expect("(")
    args: List[Term] = []
    while not p.at(")"):
        if args:
            p.expect(",")
        args.append(_parse_term(p))
    p.expect(")")
    return Atom(rel, tuple(args))


def _parse_conjunction(p: _Parser) -> List[Atom]:
    atoms = [_parse_atom(p)]
    while p.at("&"):
        p.next()
        atoms.append(_parse_atom(p))
    return atoms


def _parse_head_disjunct(p: _Parser) -> HeadDisjunct:
    exist: List[Var] = []
    if p.at("exists"):
        p.next()
        while True:
            t = p.next()
            exist.append(Var(t.text))
            if p.at(","):
                p.next()
                continue
            break
        p.expect(".")
    return HeadDisjunct(tuple(exist), tuple(_parse_conjunction(p)))


def _parse_constraints(p: _Parser) -> List[Dependency]:
    p.expect("{")
    deps: List[Dependency] = []
    while not p.at("}"):
        body = _parse_conjunction(p)
        p.expect("->")
        # an EGD right-hand side is `term = term`
        save = p.pos
        if not p.at("exists"):
            first = p.peek()
            if first is not None and first.kind in ("name", "string"):
                t1 = _parse_term(p)
                if p.at("="):
                    p.next()
                    t2 = _parse_term(p)
                    deps.append(EGD(tuple(body), t1, t2))
                    p.expect(";")
                    continue
            p.pos = save
        heads = [_parse_head_disjunct(p)]
        while p.at("|"):
            p.next()
            heads.append(_parse_head_disjunct(p))
        deps.append(TGD(tuple(body), tuple(heads)))
        p.expect(";")
    p.expect("}")
    return deps


def _parse_query(p: _Parser) -> UCQ:
    p.expect("{")
    disjuncts: List[CQ] = []
    while True:
        exist: List[Var] = []
        if p.at("exists"):
            p.next()
            while True:
                exist.append(Var(p.next().text))
                if p.at(","):
                    p.next()
                    continue
                break
            p.expect(".")
        atoms = _parse_conjunction(p)
        free: List[Var] = []
        for a in atoms:
            for v in a.variables:
                if v not in exist and v not in free:
                    free.append(v)
        disjuncts.append(CQ(tuple(free), tuple(exist), tuple(atoms)))
        if p.at("|"):
            p.next()
            continue
        break
    p.expect("}")
    return UCQ(tuple(disjuncts))


def _parse_instance_block(p: _Parser):
    p.expect("{")
    out = []
    while not p.at("}"):
        tok = p.peek()
        atom_name = p.next().text
        p.expect("(")
        args: List[Value] = []
        while not p.at(")"):
            if args:
                p.expect(",")
            t = p.next()
            if t.kind == "string":
                args.append(Const(_unquote(t.text)))
            elif t.kind == "null":
                args.append(Null(int(t.text[1:])))
            elif t.kind in ("name", "int"):
                args.append(Const(t.text))
            else:
                raise ParseError("expected constant or null", t.line, t.col)
        p.expect(")")
        p.expect(".")
        out.append((atom_name, args, tok))
    p.expect("}")
    return out


def _unquote(s: str) -> str:
    return s[1:-1].replace('\\"', '"').replace("\\\\", "\\")


def _check_constraints(schema: Schema, deps: Sequence[Dependency]) -> None:
    for dep in deps:
        atoms = list(dep.body)
        if isinstance(dep, TGD):
            for h in dep.heads:
                atoms.extend(h.atoms)
        for a in atoms:
            decl = schema.by_name.get(a.relation)
            if decl is None:
                raise SchemaError(f"undeclared relation {a.relation}")
            if decl.arity != len(a.args):
                raise SchemaError(f"arity mismatch for {a.relation}")


def _check_query(schema: Schema, q: UCQ) -> None:
    for d in q.disjuncts:
        for a in d.atoms:
            decl = schema.by_name.get(a.relation)
            if decl is None:
                raise SchemaError(f"undeclared relation {a.relation}")
            if decl.arity != len(a.args):
                raise SchemaError(f"arity mismatch for {a.relation}")


# ---------------------------------------------------------------------------
# serialization


def _term_text(t: Term) -> str:
    if isinstance(t, Var):
        return t.name
    return _const_text(t.name)


def _const_text(name: str) -> str:
    if _LOWER_NAME.match(name):
        return name
    return '"' + name.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _value_text(v: Value) -> str:
    if isinstance(v, Null):
        return f"?{v.id}"
    return v.name if _LOWER_NAME.match(v.name) else _const_text(v.name)


def _atom_text(a: Atom) -> str:
    return f"{a.relation}({', '.join(_term_text(t) for t in a.args)})"


def _conj_text(atoms: Sequence[Atom]) -> str:
    return " & ".join(_atom_text(a) for a in atoms)


def _head_text(h: HeadDisjunct) -> str:
    prefix = ""
    if h.exist_vars:
        prefix = "exists " + ", ".join(v.name for v in h.exist_vars) + ". "
    return prefix + _conj_text(h.atoms)


def _dep_text(d: Dependency) -> str:
    if isinstance(d, EGD):
        return f"{_conj_text(d.body)} -> {_term_text(d.left)} = {_term_text(d.right)}"
    return f"{_conj_text(d.body)} -> " + " | ".join(_head_text(h) for h in d.heads)


def _cq_text(d: CQ) -> str:
    prefix = ""
    if d.exist_vars:
        prefix = "exists " + ", ".join(v.name for v in d.exist_vars) + ". "
    return prefix + _conj_text(d.atoms)


def serialize(p: ProblemFile) -> str:
    """Deterministic text form; `parse(serialize(p))` reproduces `p`."""
    lines = [HEADER, "schema {"]
    for r in p.schema.relations:
        vis = "visible" if r.visible else "hidden"
        lines.append(f"  {vis} {r.name}/{r.arity};")
    lines.append("}")
    lines.append("constraints {")
    for d in p.constraints.dependencies:
        lines.append(f"  {_dep_text(d)};")
    lines.append("}")
    for name in sorted(p.queries):
        q = p.queries[name]
        body = "\n    | ".join(_cq_text(d) for d in q.disjuncts)
        lines.append(f"query {name} {{ {body} }}")
    for name in sorted(p.instances):
        inst = p.instances[name]
        lines.append(f"instance {name} {{")
        for f in inst.sorted_facts():
            args = ", ".join(_value_text(v) for v in f.args)
            lines.append(f"  {f.relation}({args}).")
        lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# first-order formula emission


def _fo_value(v: Value) -> str:
    if isinstance(v, Null):
        return f'"?{v.id}"'
    return _fo_const(v.name)


def _fo_const(name: str) -> str:
    return '"' + name.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _fo_atom(a: Atom) -> str:
    args = ", ".join(t.name if isinstance(t, Var) else _fo_const(t.name) for t in a.args)
    return f"{a.relation}({args})"


def _fo_conj(parts: Sequence[str]) -> str:
    if not parts:
        return "true"
    if len(parts) == 1:
        return parts[0]
    return "(" + " & ".join(parts) + ")"


def _fo_disj(parts: Sequence[str]) -> str:
    if not parts:
        return "false"
    if len(parts) == 1:
        return parts[0]
    return "(" + " | ".join(parts) + ")"


def _fo_query(q: UCQ) -> str:
    parts = []
    for d in q.disjuncts:
        body = _fo_conj([_fo_atom(a) for a in d.atoms])
        vs = [v.name for v in d.variables]
        if vs:
            body = f"exists {', '.join(vs)}. {body}"
        parts.append(body)
    return _fo_disj(parts)


def _fo_dependency(d: Dependency) -> str:
    body_vars = sorted({v.name for a in d.body for v in a.variables})
    body = _fo_conj([_fo_atom(a) for a in d.body])
    if isinstance(d, EGD):
        lhs = d.left.name if isinstance(d.left, Var) else _fo_const(d.left.name)
        rhs = d.right.name if isinstance(d.right, Var) else _fo_const(d.right.name)
        inner = f"({body} -> {lhs} = {rhs})"
    else:
        heads = []
        for h in d.heads:
            htxt = _fo_conj([_fo_atom(a) for a in h.atoms])
            if h.exist_vars:
                htxt = f"exists {', '.join(v.name for v in h.exist_vars)}. {htxt}"
            heads.append(htxt)
        inner = f"({body} -> {_fo_disj(heads)})"
    if body_vars:
        return f"forall {', '.join(body_vars)}. {inner}"
    return inner


def _closed_world(s: Schema, v: Instance) -> List[str]:
    parts: List[str] = []
    for r in s.visible_relations:
        facts = v.facts_of(r.name)
        for f in facts:
            if r.arity == 0:
                parts.append(f"{r.name}()")
            else:
                parts.append(f"{r.name}({', '.join(_fo_value(x) for x in f.args)})")
        xs = [f"x{i+1}" for i in range(r.arity)]
        if r.arity == 0:
            if not facts:
                parts.append(f"({r.name}() -> false)")
            continue
        options = []
        for f in facts:
            options.append(_fo_conj([f"{x} = {_fo_value(val)}" for x, val in zip(xs, f.args)]))
        parts.append(
            f"forall {', '.join(xs)}. ({r.name}({', '.join(xs)}) -> {_fo_disj(options)})"
        )
    return parts


def emit_gnfo(kind: str, q: UCQ, c: ConstraintSet, s: Schema, v: Instance) -> str:
    """Emit the satisfiability encoding of a PQI or NQI question.

    PQI on (Q, C, S, V) is equivalent to unsatisfiability of
    `!Q & C & closed-world(V)`; NQI flips the polarity of Q.
    """
    if kind not in ("PQI", "NQI"):
        raise ValueError(f"kind must be PQI or NQI, not {kind!r}")
    qtxt = _fo_query(q)
    head = f"!({qtxt})" if kind == "PQI" else f"({qtxt})"
    parts = [head]
    parts.extend(_fo_dependency(d) for d in c.dependencies)
    parts.extend(_closed_world(s, v))
    return " &\n".join(parts) + "\n"


# ---------------------------------------------------------------------------
# a small reader for the emitted formulas (used to sanity-check emission)

_FORMULA_TOKEN = re.compile(
    r"\s+|(?P<str>\"(?:[^\"\\]|\\.)*\")|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>->|[!&|().,=])"
)


def formula_well_formed(text: str) -> bool:
    """Check that an emitted formula parses under the documented syntax."""
    toks: List[str] = []
    pos = 0
    while pos < len(text):
        m = _FORMULA_TOKEN.match(text, pos)
        if not m:
            return False
        if m.group().strip():
            toks.append(m.group())
        pos = m.end()

    idx = 0

    def peek() -> Optional[str]:
        return toks[idx] if idx < len(toks) else None

    def take() -> str:
        nonlocal idx
        t = peek()
        if t is None:
            raise ValueError("eof")
        idx += 1
        return t

    def parse_formula() -> None:
        parse_impl()

    def parse_impl() -> None:
        parse_or()
        while peek() == "->":
            take()
            parse_or()

    def parse_or() -> None:
        parse_and()
        while peek() == "|":
            take()
            parse_and()

    def parse_and() -> None:
        parse_unit()
        while peek() == "&":
            take()
            parse_unit()

    def parse_unit() -> None:
        t = peek()
        if t == "!":
            take()
            parse_unit()
            return
        if t == "(":
            take()
            parse_impl()
            if take() != ")":
                raise ValueError("expected )")
            return
        if t in ("exists", "forall"):
            take()
            while True:
                name = take()
                if not _PLAIN_NAME.match(name):
                    raise ValueError("bad variable")
                if peek() == ",":
                    take()
                    continue
                break
            if take() != ".":
                raise ValueError("expected .")
            parse_impl()
            return
        if t in ("true", "false"):
            take()
            return
        # atom or equality
        head = take()
        if peek() == "(":
            take()
            while peek() != ")":
                nxt = take()
                if not (_PLAIN_NAME.match(nxt) or nxt.startswith('"')):
                    raise ValueError("bad argument")
                if peek() == ",":
                    take()
            take()
            return
        if peek() == "=":
            take()
            rhs = take()
            if not (_PLAIN_NAME.match(rhs) or rhs.startswith('"')):
                raise ValueError("bad equality")
            return
        raise ValueError(f"cannot parse near {head}")

    try:
        parse_formula()
        return idx == len(toks)
    except (ValueError, IndexError):
        return False
