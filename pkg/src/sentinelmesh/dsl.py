"""Invariant policy language: parser, compiler, evaluator.

One invariant pairs an entity filter (which graph nodes are protected) with an
action filter (which disclosures are forbidden)::

    INVARIANT nda_protection:
      FOR entity IN graph
      WHERE entity.has_label("nda_protected")
      BLOCK action
      WHERE action.audience IN ["external", "public"]
      MESSAGE "NDA-protected content cannot be shared externally"

The compiler classifies an invariant as monotone when every atom is a positive
test (has_label, =, IN).  Monotone invariants can never flip Block to Allow
when facts are added to a graph, which is what licenses local blocks standing
in for global ones.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, replace
from typing import Any, Iterable, Optional, Union

from .actions import ActionRecord, extract_target_scope
from .graph import KnowledgeGraph, NodeRecord, apply_mutation, Mutation, AddNode, AddEdge


class ParseError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} (line {line}, column {col})")
        self.line = line
        self.col = col


# --- AST ---

@dataclass(frozen=True)
class HasLabel:
    label: str


@dataclass(frozen=True)
class AttrEquals:
    attr: str
    value: Any


@dataclass(frozen=True)
class AttrIn:
    attr: str
    values: tuple


@dataclass(frozen=True)
class Not:
    inner: Union[HasLabel, AttrEquals, AttrIn]


Atom = Union[HasLabel, AttrEquals, AttrIn, Not]


@dataclass(frozen=True)
class InvariantAST:
    name: str
    entity_filter: tuple[Atom, ...]
    action_filter: tuple[Atom, ...]
    message: str


@dataclass(frozen=True)
class InvariantVerdict:
    blocked: bool
    invariant: str = ""
    message: str = ""


# --- tokenizer ---

_TOKEN_RE = re.compile(
    r"""
    (?P<WS>\s+)
  | (?P<STRING>"(?:[^"\\]|\\.)*")
  | (?P<NUMBER>-?\d+(?:\.\d+)?)
  | (?P<IDENT>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<SYM>[:.,=\[\]()])
""",
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    line, col, pos = 1, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup or ""
        raw = m.group()
        if kind != "WS":
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
    def __init__(self, toks: list[_Tok], source_end: tuple[int, int]):
        self.toks = toks
        self.i = 0
        self.end = source_end

    def peek(self) -> Optional[_Tok]:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def error(self, message: str) -> ParseError:
        tok = self.peek()
        if tok is None:
            return ParseError(message, *self.end)
        return ParseError(message, tok.line, tok.col)

    def take(self, kind: Optional[str] = None, text: Optional[str] = None) -> _Tok:
        tok = self.peek()
        if tok is None:
            raise self.error(f"unexpected end of input, expected {text or kind}")
        if kind is not None and tok.kind != kind:
            raise self.error(f"expected {text or kind}, found {tok.text!r}")
        if text is not None and tok.text != text:
            raise self.error(f"expected {text!r}, found {tok.text!r}")
        self.i += 1
        return tok

    def at_keyword(self, word: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.kind == "IDENT" and tok.text == word

    # grammar

    def parse_invariant(self) -> InvariantAST:
        self.take("IDENT", "INVARIANT")
        name = self.take("IDENT").text
        self.take("SYM", ":")
        self.take("IDENT", "FOR")
        self.take("IDENT", "entity")
        self.take("IDENT", "IN")
        self.take("IDENT", "graph")
        self.take("IDENT", "WHERE")
        entity_filter = self.parse_conjunction(subject="entity")
        self.take("IDENT", "BLOCK")
        self.take("IDENT", "action")
        self.take("IDENT", "WHERE")
        action_filter = self.parse_conjunction(subject="action")
        self.take("IDENT", "MESSAGE")
        message = self.parse_string()
        return InvariantAST(name, tuple(entity_filter), tuple(action_filter), message)

    def parse_conjunction(self, subject: str) -> list[Atom]:
        atoms = [self.parse_atom(subject)]
        while self.at_keyword("AND"):
            self.take("IDENT", "AND")
            atoms.append(self.parse_atom(subject))
        return atoms

    def parse_atom(self, subject: str) -> Atom:
        if self.at_keyword("NOT"):
            self.take("IDENT", "NOT")
            inner = self.parse_atom(subject)
            if isinstance(inner, Not):
                raise self.error("double negation is not supported")
            return Not(inner)
        tok = self.peek()
        if tok is not None and tok.kind == "IDENT" and tok.text == subject:
            self.take("IDENT", subject)
            self.take("SYM", ".")
        name = self.take("IDENT").text
        if name == "has_label":
            if subject != "entity":
                raise self.error("has_label applies to entities only")
            self.take("SYM", "(")
            label = self.parse_string()
            self.take("SYM", ")")
            return HasLabel(label)
        nxt = self.peek()
        if nxt is not None and nxt.kind == "SYM" and nxt.text == "=":
            self.take("SYM", "=")
            return AttrEquals(name, self.parse_value())
        if nxt is not None and nxt.kind == "IDENT" and nxt.text == "IN":
            self.take("IDENT", "IN")
            self.take("SYM", "[")
            values = [self.parse_value()]
            while self.peek() is not None and self.peek().text == ",":
                self.take("SYM", ",")
                values.append(self.parse_value())
            self.take("SYM", "]")
            return AttrIn(name, tuple(values))
        raise self.error("expected '=' or 'IN' after attribute name")

    def parse_string(self) -> str:
        tok = self.take("STRING")
        body = tok.text[1:-1]
        return body.replace('\\"', '"').replace("\\\\", "\\")

    def parse_value(self) -> Any:
        tok = self.peek()
        if tok is None:
            raise self.error("expected a value")
        if tok.kind == "STRING":
            return self.parse_string()
        if tok.kind == "NUMBER":
            self.take("NUMBER")
            return float(tok.text) if "." in tok.text else int(tok.text)
        raise self.error(f"expected a value, found {tok.text!r}")


def _source_end(text: str) -> tuple[int, int]:
    lines = text.split("\n")
    return len(lines), len(lines[-1]) + 1


def parse(text: str) -> InvariantAST:
    """Parse exactly one invariant."""
    toks = _tokenize(text)
    parser = _Parser(toks, _source_end(text))
    if parser.peek() is None:
        raise ParseError("empty input", 1, 1)
    ast = parser.parse_invariant()
    if parser.peek() is not None:
        raise parser.error("trailing input after invariant")
    return ast


def parse_policy(text: str) -> list[InvariantAST]:
    """Parse a policy file containing any number of invariants."""
    toks = _tokenize(text)
    parser = _Parser(toks, _source_end(text))
    out: list[InvariantAST] = []
    while parser.peek() is not None:
        out.append(parser.parse_invariant())
    names = [inv.name for inv in out]
    if len(set(names)) != len(names):
        raise ParseError("duplicate invariant name in policy set", 1, 1)
    return out


def pretty(ast: InvariantAST) -> str:
    def fmt_value(v: Any) -> str:
        if isinstance(v, str):
            escaped = v.replace("\\", "\\\\").replace('"', '\\"')
            return f'"{escaped}"'
        return repr(v) if isinstance(v, float) else str(v)

    def fmt_atom(atom: Atom, subject: str) -> str:
        if isinstance(atom, Not):
            return f"NOT {fmt_atom(atom.inner, subject)}"
        if isinstance(atom, HasLabel):
            return f"{subject}.has_label({fmt_value(atom.label)})"
        if isinstance(atom, AttrEquals):
            return f"{subject}.{atom.attr} = {fmt_value(atom.value)}"
        values = ", ".join(fmt_value(v) for v in atom.values)
        return f"{subject}.{atom.attr} IN [{values}]"

    entity = " AND ".join(fmt_atom(a, "entity") for a in ast.entity_filter)
    action = " AND ".join(fmt_atom(a, "action") for a in ast.action_filter)
    return (
        f"INVARIANT {ast.name}:\n"
        f"  FOR entity IN graph\n"
        f"  WHERE {entity}\n"
        f"  BLOCK action\n"
        f"  WHERE {action}\n"
        f"  MESSAGE {fmt_value(ast.message)}"
    )


# --- compilation and evaluation ---

def _atom_monotone(atom: Atom) -> bool:
    return not isinstance(atom, Not)


@dataclass(frozen=True)
class CompiledInvariant:
    ast: InvariantAST
    monotone: bool

    @property
    def name(self) -> str:
        return self.ast.name

    @property
    def message(self) -> str:
        return self.ast.message

    def matches_entity(self, node: NodeRecord) -> bool:
        return all(_eval_entity_atom(a, node) for a in self.ast.entity_filter)

    def matches_action(self, attrs: dict[str, Any]) -> bool:
        return all(_eval_action_atom(a, attrs) for a in self.ast.action_filter)


def _eval_entity_atom(atom: Atom, node: NodeRecord) -> bool:
    if isinstance(atom, Not):
        return not _eval_entity_atom(atom.inner, node)
    if isinstance(atom, HasLabel):
        return atom.label in node.labels
    if isinstance(atom, AttrEquals):
        return node.attributes.get(atom.attr) == atom.value
    return node.attributes.get(atom.attr) in atom.values


def _eval_action_atom(atom: Atom, attrs: dict[str, Any]) -> bool:
    if isinstance(atom, Not):
        return not _eval_action_atom(atom.inner, attrs)
    if isinstance(atom, AttrEquals):
        return attrs.get(atom.attr) == atom.value
    if isinstance(atom, AttrIn):
        return attrs.get(atom.attr) in atom.values
    raise TypeError(f"{atom!r} is not a valid action atom")


def compile_invariant(ast: InvariantAST) -> CompiledInvariant:
    monotone = all(_atom_monotone(a) for a in ast.entity_filter + ast.action_filter)
    return CompiledInvariant(ast=ast, monotone=monotone)


def compile_policy(text: str) -> list[CompiledInvariant]:
    return [compile_invariant(ast) for ast in parse_policy(text)]


def check(inv: CompiledInvariant, view, action: ActionRecord) -> InvariantVerdict:
    """Evaluate one invariant against a graph view holding disclosure facts.

    Blocks when some node matching the entity filter has a disclosure edge to
    an audience that, combined with the action's attributes, matches the
    action filter.
    """
    base_attrs = {"verb": action.verb, **action.attributes}
    for node_id, audience in view.disclosure_edges():
        node = view.get_node(node_id)
        if node is None:
            continue
        if inv.matches_entity(node) and inv.matches_action({**base_attrs, "audience": audience}):
            return InvariantVerdict(True, inv.name, inv.message)
    return InvariantVerdict(False, inv.name, inv.message)


def check_direct(inv: CompiledInvariant, view, grounded: Iterable[str],
                 action: ActionRecord) -> InvariantVerdict:
    """Simulation-free check used by the no-counterfactual ablation.

    Only directly grounded nodes are examined against the action's own scope;
    provenance closure and prior graph state never enter the decision.
    """
    attrs = {"verb": action.verb, **action.attributes, **extract_target_scope(action)}
    if not inv.matches_action(attrs):
        return InvariantVerdict(False, inv.name, inv.message)
    for node_id in grounded:
        node = view.get_node(node_id)
        if node is not None and inv.matches_entity(node):
            return InvariantVerdict(True, inv.name, inv.message)
    return InvariantVerdict(False, inv.name, inv.message)


def assert_monotone(inv: CompiledInvariant, graph: KnowledgeGraph, action: ActionRecord,
                    trials: int = 1000, seed: int = 0) -> bool:
    """Randomized monotonicity probe.

    Requires a compiled-monotone invariant currently blocking on ``graph``.
    Runs ``trials`` random fact additions (fresh nodes, fresh edges, label
    supersets on existing nodes) and reports whether the decision stayed
    Block in every trial.
    """
    if not inv.monotone:
        raise ValueError(f"invariant {inv.name!r} is not classified monotone")
    if not check(inv, graph, action).blocked:
        raise ValueError("assert_monotone requires an initially blocking case")
    rng = random.Random(seed)
    label_pool = sorted({lbl for n in graph.iter_nodes() for lbl in n.labels}) or ["extra"]
    node_ids = sorted(n.node_id for n in graph.iter_nodes())
    for trial in range(trials):
        snap = graph.fork()
        ops = []
        for k in range(rng.randint(1, 4)):
            choice = rng.random()
            if choice < 0.45:
                ops.append(AddNode(NodeRecord(
                    node_id=f"rand_{trial}_{k}",
                    labels=frozenset(rng.sample(label_pool, rng.randint(0, min(2, len(label_pool))))),
                )))
            elif choice < 0.8 and len(node_ids) >= 2:
                src, dst = rng.sample(node_ids, 2)
                ops.append(AddEdge(src, dst, rng.choice(["relates_to", "derived_from"])))
            else:
                target = graph.get_node(rng.choice(node_ids))
                extra = rng.choice(label_pool)
                snap._overlay[target.node_id] = replace(
                    target, labels=target.labels | {extra}
                )
        apply_mutation(snap, Mutation(ops))
        if not check(inv, snap, action).blocked:
            return False
    return True
