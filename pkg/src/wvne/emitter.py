"""Mixed-integer quadratically constrained model of an embedding instance.

:func:`emit_model` builds a :class:`ConstraintModel` over the binaries

* ``theta(p,v)``          block ``p`` runs on node ``v``
* ``f(p,v,t)``            node ``v`` sends traffic of ``p`` in slot ``t``
* ``s(v1,v2,p,v3,t)``     ``v1`` sends to ``v2`` in slot ``t`` the output of ``p`` hosted on ``v3``
* ``beta(t)``             slot ``t`` is used

plus two auxiliary families used by the loop-exclusion encoding:

* ``e(v1,v2,p,v)``        the edge ``v1 -> v2`` carries ``(p, v)`` traffic in some slot
* ``y(p,v,w,k)``          the ``k``-th simple path from origin ``v`` to ``w`` is fully active

Path terms come from :func:`track_flow`, a transcription of the recursive
continued-fraction construction: each hop halves the accumulator and adds the
hop indicator, so a path term equals 1 exactly when every hop is active.
:meth:`ConstraintModel.to_lp` writes CPLEX-LP text; :func:`substitute_and_check`
evaluates a concrete solution against every constraint.

Parentheses stand in for brackets in variable names because LP readers do not
accept ``[`` inside identifiers.
"""

from __future__ import annotations

import re
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Mapping, Optional, Sequence, Union

from .model import InfrastructureNetwork, OverlayApp, Solution
from .radio import SINR_RTOL
from .validator import CAPACITY_TOL, MODES

Number = Union[Fraction, float, int]

MAX_PATH_EDGES = 32
DEFAULT_VARIABLE_CAP = 250_000

HEADER_NOTES = (
    "RECONSTRUCTION: loop exclusion. For each block p, origin v and node w != v:",
    "  sum_{v2,t} s(w,v2,p,v,t) <= M * sum_k y(p,v,w,k), with y(p,v,w,k) <= path term k",
    "  and e(a,b,p,v) <= sum_t s(a,b,p,v,t). Path terms are the continued fractions",
    "  built by track_flow over e; a term reaches 1 only when every hop is active.",
    "  A direct bound on f by the raw path sum would never bind since terms are > 0.",
    "RECONSTRUCTION: receive-then-use-or-relay is written in boolean big-M form",
    "  (one relay per received (p, origin) suffices) to admit multicast fan-in.",
    "ADDED: origin(p,v) forbids traffic tagged with an origin that does not host p;",
    "  self(v,p) forbids a node transmitting to itself.",
    "SINR: denominators cleared; th*(No + I)*S - signal*S <= 0 with S the v->v' sends.",
    "NOTE: the half-offset disjunction 1/2 + sum x_i/2^i >= 1 is not used; the disjunction",
    "  over paths is the big-M sum of path indicators.",
)


class ModelTooLarge(ValueError):
    def __init__(self, counts: dict, cap: int):
        self.counts = dict(counts)
        self.cap = cap
        detail = ", ".join(f"{k}={v}" for k, v in counts.items())
        super().__init__(f"model needs {sum(counts.values())} variables (cap {cap}): {detail}")


# --- expressions --------------------------------------------------------------


@dataclass
class LinExpr:
    """``const + sum(coef * var)`` with exact rational or float coefficients."""

    terms: dict = field(default_factory=dict)
    const: Number = Fraction(0)

    @classmethod
    def var(cls, name: str, coef: Number = Fraction(1)) -> "LinExpr":
        return cls({name: coef})

    @classmethod
    def sum_of(cls, names: Iterable[str]) -> "LinExpr":
        return cls({n: Fraction(1) for n in names})

    def __add__(self, other):
        if not isinstance(other, LinExpr):
            return LinExpr(dict(self.terms), self.const + other)
        terms = dict(self.terms)
        for n, c in other.terms.items():
            terms[n] = terms.get(n, 0) + c
        return LinExpr(terms, self.const + other.const)

    __radd__ = __add__

    def __mul__(self, k: Number):
        return LinExpr({n: c * k for n, c in self.terms.items()}, self.const * k)

    __rmul__ = __mul__

    def value(self, assignment: Mapping[str, int]) -> Number:
        return self.const + sum(c * assignment.get(n, 0) for n, c in self.terms.items())


@dataclass
class Constraint:
    name: str
    family: str
    linear: dict
    sense: str                     # "<=", ">=" or "="
    rhs: Number
    quadratic: dict = field(default_factory=dict)   # (x, y) -> coef
    rel_tol: float = 0.0           # slack relative to sum |coef * value|
    abs_tol: float = 0.0

    def _products(self, a: Mapping[str, int]) -> list:
        """Nonzero ``coef * value`` terms; iterates over whichever side is sparser."""
        if len(a) < len(self.linear):
            out = [self.linear[n] * v for n, v in a.items() if v and n in self.linear]
        else:
            out = [c * a[n] for n, c in self.linear.items() if a.get(n, 0)]
        if self.quadratic:
            for (x, y), c in self.quadratic.items():
                vx = a.get(x, 0)
                if vx:
                    vy = a.get(y, 0)
                    if vy:
                        out.append(c * vx * vy)
        return out

    def lhs(self, a: Mapping[str, int]) -> Number:
        return sum(self._products(a))

    def holds(self, a: Mapping[str, int]) -> bool:
        prods = self._products(a)
        lhs = sum(prods)
        slack = self.abs_tol
        if self.rel_tol:
            slack += self.rel_tol * float(sum(abs(p) for p in prods))
        if self.sense == "<=":
            return lhs <= self.rhs + slack
        if self.sense == ">=":
            return lhs >= self.rhs - slack
        return abs(lhs - self.rhs) <= slack


def _halves(n: int) -> list[Fraction]:
    return [Fraction(1, 2 ** i) for i in range(1, n + 1)]


def conjunction_expr(xs: Sequence[str]) -> Constraint:
    """``1/2^n + sum x_i / 2^i >= 1``: true iff every ``x_i`` is 1."""
    if not xs:
        raise ValueError("a conjunction needs at least one operand")
    n = len(xs)
    linear = dict(zip(xs, _halves(n)))
    return Constraint("and(" + ",".join(xs) + ")", "and", linear, ">=", 1 - Fraction(1, 2 ** n))


def disjunction_expr(xs: Sequence[str]) -> Constraint:
    """Half-offset disjunction ``1/2 + sum x_i / 2^i >= 1``, taken literally.

    Only ``x_1 = 1`` is guaranteed to satisfy it: ``(0, 1)`` gives 3/4.  The
    model itself never uses this form.
    """
    if not xs:
        raise ValueError("a disjunction needs at least one operand")
    linear = dict(zip(xs, _halves(len(xs))))
    return Constraint("or(" + ",".join(xs) + ")", "or", linear, ">=", Fraction(1, 2))


# --- naming -------------------------------------------------------------------

_SAFE = re.compile(r"[^A-Za-z0-9_.!#$%&/;?@'{}|~`]")


class _Names:
    def __init__(self, nodes, blocks):
        self.node = self._map(nodes, "node")
        self.block = self._map(blocks, "block")

    @staticmethod
    def _map(ids, what):
        out = {}
        for i in ids:
            clean = _SAFE.sub("_", str(i))
            if clean in out.values():
                raise ValueError(f"{what} ids collide after sanitising: {i!r} -> {clean!r}")
            out[i] = clean
        return out

    def theta(self, p, v):
        return f"theta({self.block[p]},{self.node[v]})"

    def f(self, p, v, t):
        return f"f({self.block[p]},{self.node[v]},{t})"

    def s(self, v1, v2, p, v3, t):
        n = self.node
        return f"s({n[v1]},{n[v2]},{self.block[p]},{n[v3]},{t})"

    @staticmethod
    def beta(t):
        return f"beta({t})"

    def e(self, v1, v2, p, v):
        n = self.node
        return f"e({n[v1]},{n[v2]},{self.block[p]},{n[v]})"

    def y(self, p, v, w, k):
        return f"y({self.block[p]},{self.node[v]},{self.node[w]},{k})"

    def tag(self, *parts):
        out = []
        for x in parts:
            if x in self.node:
                out.append(self.node[x])
            elif x in self.block:
                out.append(self.block[x])
            else:
                out.append(str(x))
        return ",".join(out)


# --- path terms ---------------------------------------------------------------


@dataclass(frozen=True)
class PathConjunction:
    path: tuple                # origin ... start
    r: LinExpr                 # accumulator handed to the final hop
    expression: LinExpr


def flow_paths(v1, v2, p, v, visited: Iterable, r: Union[LinExpr, Number] = 1, *,
               nodes: Sequence, edge_term: Callable[[object, object], LinExpr]) -> Iterator[PathConjunction]:
    """Enumerate the terms of ``track_flow`` one path at a time."""
    if not isinstance(r, LinExpr):
        if not 0 < r <= 1:
            raise ValueError("r must lie in (0, 1]")
        r = LinExpr(const=Fraction(r))

    def rec(a, b, seen, acc, trail):
        if a == v:
            if len(trail) - 1 > MAX_PATH_EDGES:
                raise ValueError(f"path longer than {MAX_PATH_EDGES} hops")
            yield PathConjunction(tuple(reversed(trail)), acc, (edge_term(a, b) + acc) * Fraction(1, 2))
            return
        seen = seen | {a}
        for vi in nodes:
            if vi not in seen:
                r_new = (edge_term(vi, a) + acc) * Fraction(1, 2)
                yield from rec(vi, a, seen, r_new, trail + [vi])

    yield from rec(v1, v2, frozenset(visited), r, [v1])


def track_flow(v1, v2, p, v, visited: Iterable, r: Union[LinExpr, Number] = 1, *,
               nodes: Sequence, slots: Optional[Sequence[int]] = None,
               edge_term: Optional[Callable[[object, object], LinExpr]] = None,
               names: Optional[_Names] = None) -> LinExpr:
    """Sum of path terms for traffic of ``p`` from origin ``v`` reaching ``v1``.

    By default a hop ``a -> b`` contributes ``sum_t s(a,b,p,v,t)``.
    """
    if edge_term is None:
        if slots is None:
            raise ValueError("slots are required for the default hop term")
        names = names or _Names(nodes, [p])
        edge_term = lambda a, b: LinExpr.sum_of(names.s(a, b, p, v, t) for t in slots)  # noqa: E731
    total = LinExpr()
    for pc in flow_paths(v1, v2, p, v, visited, r, nodes=nodes, edge_term=edge_term):
        total = total + pc.expression
    return total


# --- model --------------------------------------------------------------------


@dataclass
class ConstraintModel:
    variables: list                # (name, kind, family, index)
    constraints: list
    objective: dict
    big_M: Fraction
    mode: str
    signal_model: str
    header: list = field(default_factory=list)
    # auxiliary variable -> expression; set to 1 when the expression reaches 1
    witnesses: dict = field(default_factory=dict)
    names: Optional[_Names] = None
    nodes: tuple = ()
    blocks: tuple = ()
    slots: int = 0

    def families(self) -> dict[str, int]:
        out = defaultdict(int)
        for c in self.constraints:
            out[c.family] += 1
        return dict(out)

    def variable_counts(self) -> dict[str, int]:
        out = defaultdict(int)
        for _, _, fam, _ in self.variables:
            out[fam] += 1
        return dict(out)

    def to_lp(self) -> str:
        lines = [f"\\ {h}" if h else "\\" for h in self.header]
        lines.append("Minimize")
        lines.extend(_wrap(" obj:", _terms(self.objective)))
        lines.append("Subject To")
        for c in self.constraints:
            body = _terms(c.linear)
            if c.quadratic:
                quad = _terms({f"{x} * {y}": k for (x, y), k in c.quadratic.items()})
                body += ["+", "["] + (quad[1:] if quad[0] == "+" else quad) + ["]"]
            if not body:
                body = ["0", _first_var(self)]
            sense = {"<=": "<=", ">=": ">=", "=": "="}[c.sense]
            lines.extend(_wrap(f" {c.name}:", body + [sense, _fmt(c.rhs)]))
        lines.append("Binaries")
        row = []
        for name, *_ in self.variables:
            row.append(name)
            if len(row) == 6:
                lines.append(" " + " ".join(row))
                row = []
        if row:
            lines.append(" " + " ".join(row))
        lines.append("End")
        return "\n".join(lines) + "\n"

    def write_lp(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_lp())


def _first_var(model):
    return model.variables[0][0]


def _fmt(c: Number) -> str:
    if isinstance(c, Fraction):
        if c.denominator == 1:
            return str(c.numerator)
        d = c.denominator
        twos = fives = 0
        while d % 2 == 0:
            d //= 2
            twos += 1
        while d % 5 == 0:
            d //= 5
            fives += 1
        if d != 1:
            return repr(float(c))
        digits = max(twos, fives)
        scaled = c * 10 ** digits
        sign = "-" if scaled < 0 else ""
        n = abs(scaled.numerator)
        whole, frac = divmod(n, 10 ** digits)
        return f"{sign}{whole}.{frac:0{digits}d}".rstrip("0").rstrip(".")
    if isinstance(c, int):
        return str(c)
    return repr(float(c))


def _terms(coefs: Mapping) -> list[str]:
    out = []
    for name, c in coefs.items():
        if c == 0:
            continue
        sign = "-" if c < 0 else "+"
        mag = -c if c < 0 else c
        out.append(sign)
        out.append(name if mag == 1 else f"{_fmt(mag)} {name}")
    return out


def _wrap(prefix: str, tokens: list[str], width: int = 100) -> list[str]:
    lines, cur = [], prefix
    for tok in tokens:
        if len(cur) + 1 + len(tok) > width:
            lines.append(cur)
            cur = "   "
        cur += " " + tok
    lines.append(cur)
    return lines


def _path_count(n: int) -> int:
    """Simple paths between two fixed nodes of the complete graph K_n."""
    total, term = 0, 1
    for k in range(n - 1):
        total += term
        term *= n - 2 - k
    return total


def variable_estimate(net: InfrastructureNetwork, app: OverlayApp) -> dict[str, int]:
    V, P, T = net.n, len(app.block_ids), net.max_slots
    return {
        "theta": P * V,
        "f": P * V * T,
        "s": V * V * P * V * T,
        "beta": T,
        "e": P * V * (V - 1) * (V - 1),
        "y": P * V * (V - 1) * _path_count(V),
    }


def default_big_m(net: InfrastructureNetwork) -> Fraction:
    return Fraction(net.n * net.n * net.max_slots + 1)


def emit_model(net: InfrastructureNetwork, app: OverlayApp, mode: str = "strict", big_m: Optional[Number] = None,
               signal_model: Optional[str] = None, variable_cap: Optional[int] = DEFAULT_VARIABLE_CAP) -> ConstraintModel:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if signal_model is not None and signal_model != net.signal_model:
        net = net.replace(signal_model=signal_model)
    counts = variable_estimate(net, app)
    if variable_cap is not None and sum(counts.values()) > variable_cap:
        raise ModelTooLarge(counts, variable_cap)
    M = Fraction(big_m) if big_m is not None else default_big_m(net)
    if M <= 0:
        raise ValueError("big-M must be positive")

    V, P, T = net.node_ids, app.block_ids, range(net.max_slots)
    nm = _Names(V, P)
    variables, cons = [], []
    one = Fraction(1)

    for p in P:
        for v in V:
            variables.append((nm.theta(p, v), "binary", "theta", (p, v)))
    for p in P:
        for v in V:
            for t in T:
                variables.append((nm.f(p, v, t), "binary", "f", (p, v, t)))
    for v1 in V:
        for v2 in V:
            for p in P:
                for v3 in V:
                    for t in T:
                        variables.append((nm.s(v1, v2, p, v3, t), "binary", "s", (v1, v2, p, v3, t)))
    for t in T:
        variables.append((nm.beta(t), "binary", "beta", (t,)))

    def add(name, family, linear, sense, rhs, **kw):
        cons.append(Constraint(name, family, {k: c for k, c in linear.items() if c != 0}, sense, rhs, **kw))

    # forwarding indicators follow the sends
    for v in V:
        for p in P:
            for t in T:
                sends = {nm.s(v, vi, p, vj, t): one for vi in V if vi != v for vj in V}
                fv = nm.f(p, v, t)
                add(f"fwd_lo({nm.tag(p, v)},{t})", "fwd_lo", {**sends, fv: -one}, ">=", 0)
                add(f"fwd_hi({nm.tag(p, v)},{t})", "fwd_hi", {**sends, fv: -M}, "<=", 0)
    # used-slot indicators
    for t in T:
        every = {nm.s(a, b, p, c, t): one for a in V for b in V for p in P for c in V}
        add(f"slot_hi({t})", "slot_hi", {**every, nm.beta(t): -M}, "<=", 0)
        add(f"slot_lo({t})", "slot_lo", {**every, nm.beta(t): -one}, ">=", 0)

    # placement
    for p in P:
        if p == app.source_block:
            for v in V:
                add(f"src({nm.tag(v)})", "place", {nm.theta(p, v): one}, "=", 1 if v in net.source_nodes else 0)
            continue
        add(f"place({nm.tag(p)})", "place", {nm.theta(p, v): one for v in V}, "=", 1)
        if p == app.sink_block:
            add(f"sink({nm.tag(net.sink_node)})", "place", {nm.theta(p, net.sink_node): one}, "=", 1)
    for v in V:
        add(f"cap({nm.tag(v)})", "cap", {nm.theta(p, v): float(app.weights[p]) for p in P}, "<=",
            float(net.capacities[v]), abs_tol=CAPACITY_TOL)

    # half duplex, one block per sender, one reception per receiver
    for v in V:
        for t in T:
            lin = {nm.f(p, v, t): one for p in P}
            for vi in V:
                for p in P:
                    for vj in V:
                        lin[nm.s(vi, v, p, vj, t)] = one
            add(f"excl({nm.tag(v)},{t})", "excl", lin, "<=", 1)

    # SINR with cleared denominator: th*No*S + th*sum_u gamma(u,v') f(.,u,t)*S - signal*S <= 0
    th, N0 = float(net.sinr_threshold), float(net.noise_floor)
    for v in V:
        for w in V:
            if v == w:
                continue
            sig = float(net.signal(v, w))
            for t in T:
                S = [nm.s(v, w, p, vi, t) for p in P for vi in V]
                lin = {x: th * N0 - sig for x in S}
                quad = {}
                for u in V:
                    g = float(net.att(u, w))
                    if u == v or g == 0:
                        continue
                    for q in P:
                        fu = nm.f(q, u, t)
                        for x in S:
                            quad[fu, x] = th * g
                add(f"sinr({nm.tag(v, w)},{t})", "sinr", lin, "<=", 0, quadratic=quad, rel_tol=SINR_RTOL)

    # flow
    for p1, p2 in app.links:
        for v in V:
            lin = {nm.s(vi, v, p1, vj, t): one for vi in V for vj in V for t in T}
            lin[nm.theta(p2, v)] = -one
            if mode == "relaxed":
                lin[nm.theta(p1, v)] = lin.get(nm.theta(p1, v), 0) + one
            add(f"recv({nm.tag(p1, p2, v)})", "recv", lin, ">=", 0)
    for p1 in P:
        succ = app.successors(p1)
        for v in V:
            for vj in V:
                lin = {nm.s(vi, v, p1, vj, t): one for vi in V for t in T}
                for p2 in succ:
                    lin[nm.theta(p2, v)] = lin.get(nm.theta(p2, v), 0) - M
                for vi in V:
                    if vi != v:
                        for t in T:
                            lin[nm.s(v, vi, p1, vj, t)] = lin.get(nm.s(v, vi, p1, vj, t), 0) - M
                add(f"relay({nm.tag(p1, v, vj)})", "relay", lin, "<=", 0)
    for p in P:
        for v in V:
            for vo in V:
                heard = {nm.s(vi, v, p, vo, ti): -M for vi in V if vi != v for ti in T}
                for t in T:
                    lin = {nm.s(v, vi, p, vo, t): one for vi in V}
                    lin.update(heard)
                    lin[nm.theta(p, v)] = -M
                    add(f"legit({nm.tag(p, v, vo)},{t})", "legit", lin, "<=", 0)
    for p in P:
        for vo in V:
            lin = {nm.s(a, b, p, vo, t): one for a in V for b in V for t in T}
            lin[nm.theta(p, vo)] = -M
            add(f"origin({nm.tag(p, vo)})", "origin", lin, "<=", 0)
    for v in V:
        for p in P:
            add(f"self({nm.tag(v, p)})", "self", {nm.s(v, v, p, vo, t): one for vo in V for t in T}, "=", 0)

    # loop exclusion
    witnesses = {}
    edge_vars = {}

    def edge(a, b, p, vo):
        key = (a, b, p, vo)
        if key not in edge_vars:
            name = nm.e(a, b, p, vo)
            edge_vars[key] = name
            variables.append((name, "binary", "e", key))
            hop = {nm.s(a, b, p, vo, t): -one for t in T}
            add(f"edge({nm.tag(a, b, p, vo)})", "edge", {name: one, **hop}, "<=", 0)
            witnesses[name] = LinExpr.sum_of(nm.s(a, b, p, vo, t) for t in T)
        return LinExpr.var(edge_vars[key])

    for p in P:
        for vo in V:
            for w in V:
                if w == vo:
                    continue
                ys = {}
                paths = flow_paths(w, w, p, vo, (), 1, nodes=V, edge_term=lambda a, b: edge(a, b, p, vo))
                for k, pc in enumerate(paths):
                    yk = nm.y(p, vo, w, k)
                    variables.append((yk, "binary", "y", (p, vo, w, k)))
                    ys[yk] = -M
                    term = pc.expression
                    lin = {yk: one, **{n: -c for n, c in term.terms.items()}}
                    add(f"path({nm.tag(p, vo, w)},{k})", "path", lin, "<=", term.const)
                    witnesses[yk] = term
                sends = {nm.s(w, v2, p, vo, t): one for v2 in V for t in T}
                add(f"loop({nm.tag(p, vo, w)})", "loop", {**sends, **ys}, "<=", 0)

    objective = {nm.beta(t): one for t in T}
    header = [
        "wvne embedding model",
        f"nodes={len(V)} blocks={len(P)} slots={len(T)} mode={mode} signal_model={net.signal_model} big_M={_fmt(M)}",
        f"sinr_threshold={th!r} noise_floor={N0!r}",
        "",
        *HEADER_NOTES,
    ]
    if mode == "relaxed":
        header.append("MODE relaxed: recv(p1,p2,v) also accepts theta(p1,v) (co-located predecessor).")
    return ConstraintModel(variables, cons, objective, M, mode, net.signal_model, header, witnesses, nm,
                           tuple(V), tuple(P), len(T))


# --- substitution -------------------------------------------------------------


def assignment_from_solution(model: ConstraintModel, sol: Solution) -> dict[str, int]:
    """0/1 values induced by ``sol``; auxiliaries take their largest admissible value."""
    nm = model.names
    nodes, blocks = set(model.nodes), set(model.blocks)
    a: dict[str, int] = {}
    for p, hosts in sol.placement.items():
        if p not in blocks or not hosts <= nodes:
            raise ValueError(f"placement of {p!r} outside the model's index sets")
        for v in hosts:
            a[nm.theta(p, v)] = 1
    for tx in sol.transmissions:
        if {tx.sender, tx.receiver, tx.origin} - nodes or tx.block not in blocks or not 0 <= tx.slot < model.slots:
            raise ValueError(f"transmission {tuple(tx)} outside the model's index sets")
        a[nm.s(*tx)] = 1
        if tx.sender != tx.receiver:
            a[nm.f(tx.block, tx.sender, tx.slot)] = 1
        a[nm.beta(tx.slot)] = 1
    for name, expr in model.witnesses.items():   # edges precede the paths that use them
        if expr.value(a) >= 1:
            a[name] = 1
    return a


def substitute_and_check(model: ConstraintModel, sol: Solution) -> list[str]:
    a = assignment_from_solution(model, sol)
    return [c.name for c in model.constraints if not c.holds(a)]
