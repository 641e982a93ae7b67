"""
Readers and writers for Deterministic Rabin Automata.

Two formats are supported: HOA v1 text with state-based acceptance and
explicit edge labels, and a small JSON schema for hand-written automata:

    {
      "ap": ["A"],
      "initial": 0,
      "states": [{"name": "s0", "edges": [{"guard": "0", "target": 0}]}],
      "rabin_pairs": [{"fin": [], "inf": [0]}]
    }

Guards use HOA label syntax in both formats: AP indices, t, f, !, &, | and
parentheses.
"""

import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path

from .automata import DRA, Edge, Guard, RabinPair
from .exceptions import ConfigError, HoaError, UnsupportedAcceptanceError

logger = logging.getLogger(__name__)

_TOKEN_RE = re.compile(
    r"""
    (?P<skip>\s+|/\*.*?\*/)
    |(?P<section>--(?:BODY|END|ABORT)--)
    |(?P<header>[A-Za-z_][\w-]*:)
    |(?P<string>"(?:[^"\\]|\\.)*")
    |(?P<int>\d+)
    |(?P<ident>[A-Za-z_@][\w-]*)
    |(?P<punct>[\[\]{}()!&|])
    """,
    re.VERBOSE | re.DOTALL,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    pos: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            raise HoaError(f"unexpected character {text[pos]!r} at offset {pos}")
        if match.lastgroup != "skip":
            tokens.append(Token(match.lastgroup, match.group(), pos))
        pos = match.end()
    return tokens


class _Cursor:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.i = 0

    def peek(self) -> Token | None:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def next(self) -> Token:
        token = self.peek()
        if token is None:
            raise HoaError("unexpected end of input")
        self.i += 1
        return token

    def expect(self, kind: str, text: str | None = None) -> Token:
        token = self.next()
        if token.kind != kind or (text is not None and token.text != text):
            wanted = text or kind
            raise HoaError(
                f"expected {wanted} at offset {token.pos}, found {token.text!r}"
            )
        return token

    def accept(self, kind: str, text: str | None = None) -> Token | None:
        token = self.peek()
        if token is None or token.kind != kind:
            return None
        if text is None or token.text == text:
            self.i += 1
            return token
        return None


# ── Guards ──────────────────────────────────────────────────────────────────


def _parse_guard_or(cur: _Cursor) -> Guard:
    guard = _parse_guard_and(cur)
    while cur.accept("punct", "|"):
        guard = guard | _parse_guard_and(cur)
    return guard


def _parse_guard_and(cur: _Cursor) -> Guard:
    guard = _parse_guard_not(cur)
    while cur.accept("punct", "&"):
        guard = guard & _parse_guard_not(cur)
    return guard


def _parse_guard_not(cur: _Cursor) -> Guard:
    if cur.accept("punct", "!"):
        return ~_parse_guard_not(cur)
    if cur.accept("punct", "("):
        guard = _parse_guard_or(cur)
        cur.expect("punct", ")")
        return guard
    token = cur.next()
    if token.kind == "int":
        return Guard.atom(int(token.text))
    if token.kind == "ident" and token.text in ("t", "f"):
        return Guard(token.text)
    raise HoaError(f"unsupported guard token {token.text!r} at offset {token.pos}")


def parse_guard(text: str) -> Guard:
    cur = _Cursor(tokenize(text))
    guard = _parse_guard_or(cur)
    if cur.peek() is not None:
        raise HoaError(f"trailing input in guard {text!r}")
    return guard


# ── Acceptance ──────────────────────────────────────────────────────────────


def _parse_acc_or(cur: _Cursor) -> list[list[tuple[str, int]]]:
    dnf = _parse_acc_and(cur)
    while cur.accept("punct", "|"):
        dnf = dnf + _parse_acc_and(cur)
    return dnf


def _parse_acc_and(cur: _Cursor) -> list[list[tuple[str, int]]]:
    dnf = _parse_acc_atom(cur)
    while cur.accept("punct", "&"):
        right = _parse_acc_atom(cur)
        dnf = [left + other for left in dnf for other in right]
    return dnf


def _parse_acc_atom(cur: _Cursor) -> list[list[tuple[str, int]]]:
    if cur.accept("punct", "("):
        dnf = _parse_acc_or(cur)
        cur.expect("punct", ")")
        return dnf
    token = cur.next()
    if token.kind == "ident" and token.text == "t":
        return [[]]
    if token.kind == "ident" and token.text == "f":
        return []
    if token.kind == "ident" and token.text in ("Fin", "Inf"):
        cur.expect("punct", "(")
        if cur.accept("punct", "!"):
            raise UnsupportedAcceptanceError(
                "complemented acceptance sets are not supported"
            )
        number = int(cur.expect("int").text)
        cur.expect("punct", ")")
        return [[(token.text, number)]]
    raise UnsupportedAcceptanceError(f"unexpected acceptance token {token.text!r}")


def rabin_pairs_from_dnf(
    dnf: list[list[tuple[str, int]]], marks: list[frozenset[int]]
) -> tuple[RabinPair, ...]:
    """
    Turn a disjunction of Fin/Inf conjunctions into Rabin pairs.

    Each conjunct may hold at most one Fin and at most one Inf atom; a missing
    Fin means E=∅ and a missing Inf means F=all states.
    """
    all_states = frozenset(range(len(marks)))
    pairs = []
    for conjunct in dnf:
        fins = sorted({n for kind, n in conjunct if kind == "Fin"})
        infs = sorted({n for kind, n in conjunct if kind == "Inf"})
        if len(fins) > 1 or len(infs) > 1:
            raise UnsupportedAcceptanceError(
                f"conjunct {conjunct} is not a single Rabin pair"
            )
        fin = frozenset()
        if fins:
            fin = frozenset(s for s, m in enumerate(marks) if fins[0] in m)
        inf = all_states
        if infs:
            inf = frozenset(s for s, m in enumerate(marks) if infs[0] in m)
        pairs.append(RabinPair(fin=fin, inf=inf))
    if not pairs:
        raise UnsupportedAcceptanceError("acceptance condition is unsatisfiable")
    return tuple(pairs)


# ── HOA ─────────────────────────────────────────────────────────────────────


def _header_items(cur: _Cursor) -> list[tuple[str, list[Token]]]:
    items = []
    while True:
        token = cur.next()
        if token.kind == "section":
            if token.text != "--BODY--":
                raise HoaError(f"expected --BODY--, found {token.text}")
            return items
        if token.kind != "header":
            raise HoaError(
                f"expected a header item at offset {token.pos}, "
                f"found {token.text!r}"
            )
        values = []
        while cur.peek() is not None and cur.peek().kind not in ("header", "section"):
            values.append(cur.next())
        items.append((token.text[:-1], values))


def _unquote(token: Token) -> str:
    return json.loads(token.text)


def parse_hoa(text: str) -> DRA:
    """
    Parse a HOA v1 deterministic Rabin automaton.

    Raises HoaError (or a subclass) for syntax errors, transition-based
    acceptance, implicit labels, non-Rabin acceptance, nondeterminism and
    incompleteness.
    """
    cur = _Cursor(tokenize(text))
    items = _header_items(cur)
    if not items or items[0][0] != "HOA" or [t.text for t in items[0][1]] != ["v1"]:
        raise HoaError("document must start with 'HOA: v1'")

    n_states = None
    starts = []
    ap_names: list[str] = []
    acceptance: list[Token] | None = None
    n_sets = 0
    for key, values in items[1:]:
        if key == "States":
            n_states = int(values[0].text)
        elif key == "Start":
            if len(values) != 1 or values[0].kind != "int":
                raise HoaError("alternating start states are not supported")
            starts.append(int(values[0].text))
        elif key == "AP":
            count = int(values[0].text)
            ap_names = [_unquote(t) for t in values[1:]]
            if len(ap_names) != count:
                raise HoaError(
                    f"AP header declares {count} names but lists {len(ap_names)}"
                )
        elif key == "Acceptance":
            n_sets = int(values[0].text)
            acceptance = values[1:]
        elif key == "acc-name":
            logger.debug("HOA acc-name: %s", " ".join(t.text for t in values))
    if len(starts) != 1:
        raise HoaError(f"exactly one Start state is required, found {len(starts)}")
    if acceptance is None:
        raise HoaError("missing Acceptance header")

    state_edges: dict[int, list[Edge]] = {}
    state_marks: dict[int, frozenset[int]] = {}
    state_names: dict[int, str | None] = {}
    current = None
    while True:
        token = cur.next()
        if token.kind == "section":
            if token.text != "--END--":
                raise HoaError(f"automaton ended with {token.text}")
            break
        if token.kind == "header" and token.text == "State:":
            if cur.accept("punct", "["):
                raise HoaError("state-labelled automata are not supported")
            current = int(cur.expect("int").text)
            if current in state_edges:
                raise HoaError(f"state {current} is defined twice")
            name = cur.accept("string")
            state_names[current] = _unquote(name) if name else None
            state_marks[current] = _parse_marks(cur)
            state_edges[current] = []
            continue
        if current is None:
            raise HoaError(f"edge outside of a state at offset {token.pos}")
        if token.kind != "punct" or token.text != "[":
            raise HoaError(
                f"implicit edge labels are not supported (offset {token.pos})"
            )
        guard = _parse_guard_or(cur)
        cur.expect("punct", "]")
        target = int(cur.expect("int").text)
        if cur.accept("punct", "&"):
            raise HoaError("universal branching is not supported")
        if cur.accept("punct", "{"):
            raise UnsupportedAcceptanceError(
                "transition-based acceptance marks are not supported"
            )
        state_edges[current].append(Edge(guard=guard, target=target))

    if n_states is None:
        n_states = len(state_edges)
    if sorted(state_edges) != list(range(n_states)):
        raise HoaError(f"states must be numbered 0..{n_states - 1}")

    marks = [state_marks[s] for s in range(n_states)]
    if any(m >= n_sets for ms in marks for m in ms):
        raise HoaError(f"acceptance mark outside the declared {n_sets} sets")
    acc_cur = _Cursor(acceptance)
    dnf = _parse_acc_or(acc_cur)
    if acc_cur.peek() is not None:
        raise UnsupportedAcceptanceError("trailing tokens in the Acceptance header")

    names = tuple(state_names[s] for s in range(n_states))
    return DRA(
        ap_names=tuple(ap_names),
        initial=starts[0],
        edges=tuple(tuple(state_edges[s]) for s in range(n_states)),
        rabin_pairs=rabin_pairs_from_dnf(dnf, marks),
        state_names=names if any(n is not None for n in names) else None,
    )


def _parse_marks(cur: _Cursor) -> frozenset[int]:
    if not cur.accept("punct", "{"):
        return frozenset()
    marks = set()
    while not cur.accept("punct", "}"):
        marks.add(int(cur.expect("int").text))
    return frozenset(marks)


def format_hoa(dra: DRA) -> str:
    """Print `dra` as HOA v1; pair i uses acceptance sets 2i (Fin) and 2i+1 (Inf)."""
    n_pairs = len(dra.rabin_pairs)
    conjuncts = [f"Fin({2 * i}) & Inf({2 * i + 1})" for i in range(n_pairs)]
    if n_pairs == 1:
        condition = conjuncts[0]
    else:
        condition = " | ".join(f"({c})" for c in conjuncts)
    aps = " ".join(json.dumps(name) for name in dra.ap_names)
    lines = [
        "HOA: v1",
        f"States: {dra.n_states}",
        f"Start: {dra.initial}",
        f"AP: {len(dra.ap_names)}" + (f" {aps}" if aps else ""),
        f"acc-name: Rabin {n_pairs}",
        f"Acceptance: {2 * n_pairs} {condition}",
        "properties: trans-labels explicit-labels state-acc deterministic complete",
        "--BODY--",
    ]
    for s, edges in enumerate(dra.edges):
        marks = sorted(
            [2 * i for i, p in enumerate(dra.rabin_pairs) if s in p.fin]
            + [2 * i + 1 for i, p in enumerate(dra.rabin_pairs) if s in p.inf]
        )
        line = f"State: {s}"
        if dra.state_names is not None and dra.state_names[s] is not None:
            line += f" {json.dumps(dra.state_names[s])}"
        if marks:
            line += " {" + " ".join(str(m) for m in marks) + "}"
        lines.append(line)
        lines.extend(f"[{edge.guard}] {edge.target}" for edge in edges)
    lines.append("--END--")
    return "\n".join(lines) + "\n"


# ── JSON ────────────────────────────────────────────────────────────────────


def parse_dra_json(text: str) -> DRA:
    try:
        doc = json.loads(text)
        states = doc["states"]
        edges = tuple(
            tuple(
                Edge(parse_guard(e["guard"]), int(e["target"]))
                for e in state["edges"]
            )
            for state in states
        )
        pairs = tuple(
            RabinPair(fin=frozenset(p.get("fin", [])), inf=frozenset(p.get("inf", [])))
            for p in doc["rabin_pairs"]
        )
        names = tuple(state.get("name") for state in states)
        return DRA(
            ap_names=tuple(doc.get("ap", [])),
            initial=int(doc.get("initial", 0)),
            edges=edges,
            rabin_pairs=pairs,
            state_names=names if any(n is not None for n in names) else None,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise HoaError(f"malformed JSON automaton: {exc}") from exc


def format_dra_json(dra: DRA) -> str:
    states = []
    for s, edges in enumerate(dra.edges):
        state = {"edges": [{"guard": str(e.guard), "target": e.target} for e in edges]}
        if dra.state_names is not None and dra.state_names[s] is not None:
            state["name"] = dra.state_names[s]
        states.append(state)
    doc = {
        "ap": list(dra.ap_names),
        "initial": dra.initial,
        "states": states,
        "rabin_pairs": [
            {"fin": sorted(p.fin), "inf": sorted(p.inf)} for p in dra.rabin_pairs
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


def load_dra(path: str | Path) -> DRA:
    """Read an automaton file; `.json` selects the JSON schema, anything else HOA."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"automaton file not found: {path}")
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ConfigError(f"automaton file {path} is not UTF-8 text: {exc}") from exc
    dra = parse_dra_json(text) if path.suffix.lower() == ".json" else parse_hoa(text)
    logger.info(
        "Loaded automaton %s: %d states, %d Rabin pair(s), APs %s",
        path.name,
        dra.n_states,
        len(dra.rabin_pairs),
        list(dra.ap_names),
    )
    return dra
