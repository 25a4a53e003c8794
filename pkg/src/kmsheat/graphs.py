"""Finite directed graphs, their path-space heat traces and gauge-KMS states.

Paths are read left to right: ``mu = (e_1, ..., e_n)`` is a path when
``r(e_j) = s(e_{j+1})``.  The vertex matrix is
``M[u, v] = #{e : s(e) = u, r(e) = v}``, the edge matrix is
``A[e, f] = 1`` iff ``r(e) = s(f)``.

The spectral data attached to an infinite base path ``y`` lives on the
points tail-equivalent to ``y``.  Its nonnegative part has, at level
``n``, one eigenvector for each path ``sigma`` of length ``n`` ending at
``s(y_1)``; all counts are exact Python integers.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Mapping, Optional, Sequence

import numpy as np

from .asymptotics import LimitReport, LimitSchedule, extended_limit
from .errors import (
    BelowCritical,
    BelowLogE,
    IncompleteStateTable,
    InvalidInput,
    NotPrimitive,
)
from .spectral import (
    GrowthBound,
    ObservableInsertion,
    SpectralMeasure,
    gibbs_functional,
    heat_trace,
)

Path = tuple


@dataclass(frozen=True)
class Edge:
    id: str
    src: str
    dst: str


class DirectedGraph:
    """Finite directed multigraph without sources or sinks."""

    def __init__(self, vertices: Sequence, edges: Iterable, require_regular: bool = True):
        self.vertices = tuple(str(v) for v in vertices)
        if len(set(self.vertices)) != len(self.vertices):
            raise InvalidInput("duplicate vertex ids")
        self.edges = tuple(e if isinstance(e, Edge) else Edge(*map(str, e)) for e in edges)
        if not self.edges:
            raise InvalidInput("graph has no edges")
        ids = [e.id for e in self.edges]
        if len(set(ids)) != len(ids):
            raise InvalidInput("duplicate edge ids")
        vset = set(self.vertices)
        for e in self.edges:
            if e.src not in vset or e.dst not in vset:
                raise InvalidInput(f"edge {e.id!r} references an unknown vertex")
        self._vidx = {v: i for i, v in enumerate(self.vertices)}
        self._edge = {e.id: e for e in self.edges}
        self._eidx = {e.id: i for i, e in enumerate(self.edges)}
        if require_regular:
            M = self.vertex_matrix
            if np.any(M.sum(axis=1) == 0):
                raise InvalidInput("graph has a sink")
            if np.any(M.sum(axis=0) == 0):
                raise InvalidInput("graph has a source")

    # constructors -----------------------------------------------------------
    @classmethod
    def cuntz(cls, n: int) -> "DirectedGraph":
        """One vertex with ``n`` loops (the Cuntz algebra O_n)."""
        if n < 1:
            raise InvalidInput("need at least one loop")
        return cls(["v"], [(f"e{i + 1}", "v", "v") for i in range(n)])

    @classmethod
    def fibonacci(cls) -> "DirectedGraph":
        """Two vertices with vertex matrix [[1, 1], [1, 0]]: a loop at v1 and a 2-cycle."""
        return cls(["v1", "v2"], [("a", "v1", "v1"), ("b", "v1", "v2"), ("c", "v2", "v1")])

    @classmethod
    def from_vertex_matrix(cls, M, names: Optional[Sequence[str]] = None) -> "DirectedGraph":
        M = np.asarray(M, dtype=int)
        names = list(names) if names else [str(i) for i in range(M.shape[0])]
        edges = []
        for i, j in itertools.product(range(M.shape[0]), repeat=2):
            for k in range(int(M[i, j])):
                edges.append((f"{names[i]}>{names[j]}#{k}", names[i], names[j]))
        return cls(names, edges)

    @classmethod
    def from_json(cls, payload: Mapping) -> "DirectedGraph":
        try:
            edges = [(e["id"], e["src"], e["dst"]) for e in payload["edges"]]
            return cls(payload["vertices"], edges)
        except (KeyError, TypeError) as exc:
            raise InvalidInput(f"malformed graph description: {exc}") from exc

    def to_json(self) -> dict:
        return {
            "vertices": list(self.vertices),
            "edges": [{"id": e.id, "src": e.src, "dst": e.dst} for e in self.edges],
        }

    # structure --------------------------------------------------------------
    def edge(self, eid: str) -> Edge:
        try:
            return self._edge[eid]
        except KeyError:
            raise InvalidInput(f"unknown edge {eid!r}") from None

    def s(self, eid: str) -> str:
        return self.edge(eid).src

    def r(self, eid: str) -> str:
        return self.edge(eid).dst

    def vindex(self, v: str) -> int:
        return self._vidx[v]

    @cached_property
    def vertex_matrix(self) -> np.ndarray:
        M = np.zeros((len(self.vertices),) * 2, dtype=np.int64)
        for e in self.edges:
            M[self._vidx[e.src], self._vidx[e.dst]] += 1
        return M

    @cached_property
    def edge_matrix(self) -> np.ndarray:
        A = np.zeros((len(self.edges),) * 2, dtype=np.int64)
        for i, e in enumerate(self.edges):
            for j, f in enumerate(self.edges):
                A[i, j] = e.dst == f.src
        return A

    def is_path(self, mu: Sequence[str]) -> bool:
        return all(self.r(a) == self.s(b) for a, b in zip(mu, mu[1:]))

    def check_path(self, mu: Sequence[str]) -> Path:
        mu = tuple(mu)
        for e in mu:
            self.edge(e)
        if not self.is_path(mu):
            raise InvalidInput(f"{mu} is not a path")
        return mu

    def paths(self, length: int, start: Optional[str] = None) -> list[Path]:
        """All paths of the given length, optionally from a fixed vertex."""
        out: list[Path] = [()]
        for _ in range(length):
            nxt = []
            for p in out:
                v = self.r(p[-1]) if p else start
                nxt.extend(p + (e.id,) for e in self.edges if v is None or e.src == v)
            out = nxt
        return out

    @cached_property
    def spectral_radius(self) -> float:
        return float(max(abs(np.linalg.eigvals(self.vertex_matrix.astype(float)))))


@dataclass(frozen=True)
class BasePoint:
    """Eventually periodic infinite path ``prefix . cycle . cycle ...``."""

    prefix: tuple
    cycle: tuple

    def __post_init__(self):
        object.__setattr__(self, "prefix", tuple(self.prefix))
        object.__setattr__(self, "cycle", tuple(self.cycle))
        if not self.cycle:
            raise InvalidInput("base point cycle must be nonempty")

    @classmethod
    def from_json(cls, payload: Mapping) -> "BasePoint":
        return cls(tuple(payload.get("prefix", ())), tuple(payload["cycle"]))

    def validate(self, graph: DirectedGraph) -> "BasePoint":
        word = self.prefix + self.cycle + self.cycle[:1]
        graph.check_path(word)
        return self

    def edge(self, j: int) -> str:
        """The j-th edge, 1-indexed."""
        if j < 1:
            raise IndexError(j)
        if j <= len(self.prefix):
            return self.prefix[j - 1]
        return self.cycle[(j - 1 - len(self.prefix)) % len(self.cycle)]

    def head(self, n: int) -> Path:
        return tuple(self.edge(j) for j in range(1, n + 1))


@dataclass(frozen=True)
class PerronData:
    spectral_radius: float
    right_vector: np.ndarray
    left_vector: np.ndarray
    right_l1: np.ndarray
    left_l1: np.ndarray
    primitivity_exponent: int
    residual: float
    iterations: int


def primitivity_exponent(A: np.ndarray) -> int:
    """Smallest k with ``A^k > 0``; raises NotPrimitive past Wielandt's bound."""
    n = A.shape[0]
    bound = n * n - 2 * n + 2 if n > 1 else 1
    B = (A > 0).astype(np.int64)
    P = B.copy()
    for k in range(1, bound + 1):
        if np.all(P > 0):
            return k
        P = ((P @ B) > 0).astype(np.int64)
    zero = tuple(int(i) for i in np.argwhere(P == 0)[0])
    raise NotPrimitive(f"no power up to {bound} is positive; zero entry at {zero}", zero)


def _power_iteration(A: np.ndarray, tol: float, max_iter: int) -> tuple[float, np.ndarray, int]:
    # the shift by the identity keeps the iteration aperiodic-safe
    B = A + np.eye(A.shape[0])
    x = np.ones(A.shape[0]) / math.sqrt(A.shape[0])
    lam = 0.0
    for it in range(1, max_iter + 1):
        y = B @ x
        y /= np.linalg.norm(y)
        if np.linalg.norm(y - x) < tol * 1e-2:
            x = y
            break
        x = y
    lam = float(x @ (A @ x)) / float(x @ x)
    return lam, x, it


def perron(graph_or_matrix, tol: float = 1e-12, max_iter: int = 100_000) -> PerronData:
    """Perron-Frobenius data of the edge matrix by power iteration.

    Examples
    --------
    >>> round(perron(DirectedGraph.cuntz(3)).spectral_radius, 10)
    3.0
    """
    if isinstance(graph_or_matrix, DirectedGraph):
        A = graph_or_matrix.edge_matrix.astype(float)
    else:
        A = np.asarray(graph_or_matrix, dtype=float)
    k = primitivity_exponent(A)
    r, right, it1 = _power_iteration(A, tol, max_iter)
    _, left, it2 = _power_iteration(A.T, tol, max_iter)
    # Rayleigh quotient from both sides for the radius
    r = float(left @ A @ right) / float(left @ right)
    res = max(
        np.linalg.norm(A @ right - r * right, np.inf),
        np.linalg.norm(left @ A - r * left, np.inf),
    )
    if res > tol * max(1.0, r) * 1e3:
        raise InvalidInput(f"power iteration did not converge (residual {res:.2e})")
    return PerronData(
        spectral_radius=r,
        right_vector=right,
        left_vector=left,
        right_l1=right / right.sum(),
        left_l1=left / left.sum(),
        primitivity_exponent=k,
        residual=float(res),
        iterations=max(it1, it2),
    )


def vertex_perron(M: np.ndarray) -> tuple[float, np.ndarray]:
    """Spectral radius and the l1-normalised right Perron vector ``M h = r h``."""
    w, V = np.linalg.eig(np.asarray(M, dtype=float))
    i = int(np.argmax(w.real))
    h = np.abs(V[:, i].real)
    return float(w[i].real), h / h.sum()


class PathCounter:
    """Exact counts of paths ending at a fixed vertex, memoised by length.

    ``column(m)[u] = (M^m)[u, v0]`` = number of length-m paths from u to v0.
    """

    def __init__(self, graph: DirectedGraph, v0: str):
        self.graph = graph
        self.v0 = graph.vindex(v0)
        self._M = [[int(x) for x in row] for row in graph.vertex_matrix]
        n = len(self._M)
        first = [0] * n
        first[self.v0] = 1
        self._cols = [first]
        self._logs: Optional[np.ndarray] = None

    def column(self, m: int) -> list[int]:
        M, cols = self._M, self._cols
        while len(cols) <= m:
            c = cols[-1]
            cols.append([sum(M[u][w] * c[w] for w in range(len(c)) if M[u][w]) for u in range(len(c))])
            self._logs = None
        return cols[m]

    def level_count(self, n: int) -> int:
        return sum(self.column(n))

    def log_columns(self, m: int) -> np.ndarray:
        """``log column(j)`` for ``j <= m`` as a float array of shape (m+1, |V|)."""
        self.column(m)
        if self._logs is None or self._logs.shape[0] <= m:
            self._logs = np.array(
                [[math.log(x) if x > 0 else -math.inf for x in c] for c in self._cols]
            )
        return self._logs[: m + 1]


class GraphHeatModel:
    """Nonnegative path-space spectrum of a graph at a base point, with word insertions."""

    def __init__(self, graph: DirectedGraph, y: BasePoint):
        self.graph = graph
        self.y = y.validate(graph)
        self.v0 = graph.s(y.edge(1))
        self.counter = PathCounter(graph, self.v0)
        M = graph.vertex_matrix
        r, h = vertex_perron(M)
        self.radius = r
        self.h = h
        # c_n = 1^T M^n e_{v0} <= r^n |h|_1 / h_{v0}; the slack covers rounding in h
        K = (1 + 1e-9) / max(h[self.counter.v0], 1e-300)
        rate = math.log(r) + 1e-12 if r > 0 else 0.0
        if r > 1 + 1e-9:
            self.growth = GrowthBound.from_levels(K, rate)
        else:
            self.growth = GrowthBound.from_levels(K, rate, slack=1e-3)
        self._measures: dict[int, SpectralMeasure] = {}

    @property
    def beta(self) -> float:
        return math.log(self.radius)

    def _levels_for(self, R: float) -> int:
        return max(8, int(math.floor(R)) + 1)

    def measure(self, R: float = 64) -> SpectralMeasure:
        L = self._levels_for(R)
        if L not in self._measures:
            logs = self.counter.log_columns(L)
            logw = np.logaddexp.reduce(logs, axis=1)
            self._measures[L] = SpectralMeasure(
                np.arange(L + 1, dtype=float), logw, L + 0.5, self.growth, self.measure
            )
        return self._measures[L]

    def insertion_ratio(self, mu: Path, nu: Path, L: int) -> np.ndarray:
        """``<x, S_mu S_nu^* x>`` summed over level n, divided by the level weight."""
        g = self.graph
        mu, nu = g.check_path(mu), g.check_path(nu)
        out = np.zeros(L + 1)
        if mu != nu:
            return out
        k = len(mu)
        if k == 0:
            out[:] = 1.0
            return out
        logs = self.counter.log_columns(L)
        total = np.logaddexp.reduce(logs, axis=1)
        ru = g.vindex(g.r(mu[-1]))
        if L >= k:
            with np.errstate(invalid="ignore"):
                out[k:] = np.exp(logs[: L + 1 - k, ru] - total[k:])
        # short levels: x = mu[:n] y requires mu[n:] to be a prefix of y
        for n in range(min(k, L + 1)):
            if mu[n:] == self.y.head(k - n):
                out[n] = math.exp(-total[n])
        return np.nan_to_num(out)

    def insertion(self, mu: Path, nu: Path = None, R: float = 64) -> ObservableInsertion:
        nu = mu if nu is None else nu
        base = self.measure(R)
        L = base.lam.size - 1
        ratio = self.insertion_ratio(tuple(mu), tuple(nu), L)
        label = f"S{list(mu)}S{list(nu)}*"
        return ObservableInsertion(
            base, np.clip(ratio, 0.0, 1.0), label, 1.0,
            lambda R2: self.insertion(mu, nu, R2),
        )

    def vertex_insertion(self, v: str, R: float = 64) -> ObservableInsertion:
        """Insertion of the vertex projection ``p_v``."""
        base = self.measure(R)
        L = base.lam.size - 1
        g = self.graph
        logs = self.counter.log_columns(L)
        total = np.logaddexp.reduce(logs, axis=1)
        # x = sigma y starts at s(sigma_1), or at v0 when sigma is empty
        ratio = np.exp(logs[:, g.vindex(v)] - total)
        return ObservableInsertion(
            base, np.nan_to_num(ratio), f"p[{v}]", 1.0, lambda R2: self.vertex_insertion(v, R2)
        )


def dy_positive_heat_trace(
    graph: DirectedGraph,
    y: BasePoint,
    word: Optional[tuple] = None,
    t: float = 1.0,
    eps: float = 1e-12,
    model: Optional[GraphHeatModel] = None,
) -> float:
    """``Tr(P_D S_mu S_nu^* e^{-tD})`` on the positive path-space spectrum.

    ``word`` is ``(mu, nu)`` or ``None`` for the plain heat trace.
    """
    model = model or GraphHeatModel(graph, y)
    if t <= model.beta:
        raise BelowCritical(f"t={t:g} is not above log r = {model.beta:g}")
    if word is None:
        return heat_trace(model.measure(), t, eps).value
    mu, nu = word
    if len(mu) != len(nu) or tuple(mu) != tuple(nu):
        graph.check_path(mu), graph.check_path(nu)
        return 0.0
    return heat_trace(model.insertion(tuple(mu), tuple(nu)), t, eps).value


@dataclass(frozen=True)
class FullHeatTrace:
    value: float
    tail_bound: float
    cutoff: int
    kappa_zero_part: float


def dy_full_heat_trace(
    graph: DirectedGraph, y: BasePoint, t: float, eps: float = 1e-10, max_level: int = 400
) -> FullHeatTrace:
    """Heat trace of ``|D_y|`` over the whole tail-equivalence class of ``y``.

    Points are labelled by a lag ``n`` and the minimal number ``k`` of
    edges of ``y`` that are cut off: ``x = sigma y_{k+1} y_{k+2}...`` with
    ``|sigma| = n + k``.  The eigenvalue is ``n`` when ``k = 0`` and
    ``|n| + k`` otherwise.  Minimality of ``k`` excludes ``sigma`` whose
    last edge equals ``y_k``.
    """
    y.validate(graph)
    E = len(graph.edges)
    if t <= math.log(E):
        raise BelowLogE(f"t={t:g} must exceed log|E| = {math.log(E):g}")
    q = E * math.exp(-t)

    def tail(R: int) -> float:
        m = R + 1
        s0 = q**m / (1 - q)
        s1 = q**m * (m - (m - 1) * q) / (1 - q) ** 2
        return 2 * s1 + s0

    R = 0
    while tail(R) > eps:
        R += 1
        if R > max_level:
            raise BelowLogE(f"t={t:g} too close to log|E| for level cap {max_level}")
    M = [[int(x) for x in row] for row in graph.vertex_matrix]
    nv = len(M)
    # rows[L][v] = number of paths of length L ending at v
    rows = [[1] * nv]
    for _ in range(2 * R + 1):
        p = rows[-1]
        rows.append([sum(p[u] * M[u][v] for u in range(nv)) for v in range(nv)])

    def count(L: int, k: int, minimal: bool) -> int:
        v = graph.vindex(graph.s(y.edge(k + 1)))
        c = rows[L][v]
        if minimal and L >= 1:
            c -= rows[L - 1][graph.vindex(graph.s(y.edge(k)))]
        return c

    total = 0.0
    kappa0 = 0.0
    for lam in range(R + 1):
        w = math.exp(-t * lam)
        c0 = count(lam, 0, False)
        kappa0 += c0 * w
        acc = c0
        for k in range(1, lam + 1):
            for n in {lam - k, -(lam - k)}:
                if k < max(0, -n):
                    continue
                acc += count(n + k, k, k > max(0, -n))
        total += acc * w
    return FullHeatTrace(total, tail(R), R, kappa0)


@dataclass(frozen=True)
class GraphStateValue:
    value: float
    error_estimate: float
    converged: bool
    closed_form_prediction: float
    corrected_prediction: float
    agreement: float
    beta: float
    report: LimitReport


def _default_schedule(beta: float) -> LimitSchedule:
    return LimitSchedule.geometric(beta, first=0.4, ratio=0.5, n=8, policy="richardson")


def graph_kms_state(
    graph: DirectedGraph,
    y: BasePoint,
    word: tuple,
    schedule: Optional[LimitSchedule] = None,
    model: Optional[GraphHeatModel] = None,
    eps: float = 1e-13,
) -> GraphStateValue:
    """Extended limit of the heat-trace ratio for ``S_mu S_nu^*`` (or ``p_v``).

    ``word`` is ``(mu, nu)`` or a vertex id (for the projection ``p_v``).

    The ratio is the defining construction.  Alongside it two Perron
    expressions are reported: ``closed_form_prediction`` uses the edge
    Perron vector ``w`` as ``w_{mu_last}/|w|_1 * r^{-|mu|}``, and
    ``corrected_prediction`` uses the vertex Perron vector ``h`` as
    ``h_{r(mu)}/|h|_1 * r^{-|mu|}``, which sums to one over any
    Cuntz-Krieger partition of unity.
    """
    model = model or GraphHeatModel(graph, y)
    perron(graph)  # primitivity gate
    beta = model.beta
    schedule = schedule or _default_schedule(beta)
    if abs(schedule.anchor - beta) > 1e-9:
        raise InvalidInput(f"schedule anchored at {schedule.anchor:g}, expected log r = {beta:g}")
    denom_cache = {}

    if isinstance(word, str):
        v = word
        ins_factory = lambda: model.vertex_insertion(v)
        mu = None
    else:
        mu, nu = (tuple(w) for w in word)
        if mu != nu:
            graph.check_path(mu), graph.check_path(nu)
            zero = LimitReport(0.0, 0.0, True, tuple(schedule.t), (0.0,) * len(schedule.t))
            return GraphStateValue(0.0, 0.0, True, 0.0, 0.0, 1.0, beta, zero)
        ins_factory = lambda: model.insertion(mu, nu)

    def ratio(t):
        return gibbs_functional(ins_factory(), model.measure(), t, eps).value

    rep = extended_limit(ratio, schedule, rtol=1e-8, atol=1e-10)
    pd = perron(graph)
    r = pd.spectral_radius
    h = model.h
    if mu is None:
        i = graph.vindex(word)
        closed = float(sum(pd.right_l1[j] for j, e in enumerate(graph.edges) if e.dst == word))
        corrected = float(h[i])
    elif len(mu) == 0:
        closed = corrected = 1.0
    else:
        j = graph._eidx[mu[-1]]
        closed = float(pd.right_l1[j]) * r ** (-len(mu))
        corrected = float(h[graph.vindex(graph.r(mu[-1]))]) * r ** (-len(mu))
    agreement = rep.limit / closed if closed else math.nan
    return GraphStateValue(rep.limit, rep.error_estimate, rep.converged, closed, corrected, agreement, beta, rep)


# ---------------------------------------------------------------------------
# monomials S_alpha S_beta^* and the KMS functional equation

@dataclass(frozen=True)
class Monomial:
    """``S_alpha S_beta^*`` with common range vertex ``v`` (``p_v`` when both are empty)."""

    alpha: tuple
    beta: tuple
    v: str

    @property
    def degree(self) -> int:
        return len(self.alpha) - len(self.beta)

    def adjoint(self) -> "Monomial":
        return Monomial(self.beta, self.alpha, self.v)

    def __str__(self):
        a = "".join(self.alpha) or f"p{self.v}"
        b = "".join(self.beta) or f"p{self.v}"
        return f"S[{a}]S[{b}]*"


def monomial(graph: DirectedGraph, alpha: Sequence[str], beta: Sequence[str], v: Optional[str] = None) -> Monomial:
    alpha, beta = graph.check_path(alpha), graph.check_path(beta)
    ends = {graph.r(p[-1]) for p in (alpha, beta) if p}
    if v is not None:
        ends.add(v)
    if len(ends) != 1:
        raise InvalidInput("alpha and beta must end at the same vertex")
    return Monomial(alpha, beta, ends.pop())


def multiply(graph: DirectedGraph, x: Monomial, y: Monomial) -> Optional[Monomial]:
    """Product in the graph algebra; ``None`` stands for zero."""
    b, g = x.beta, y.alpha
    if len(g) >= len(b):
        if g[: len(b)] != b:
            return None
        rest = g[len(b):]
        if rest:
            if graph.s(rest[0]) != x.v:
                return None
        elif x.v != y.v:
            return None
        return Monomial(x.alpha + rest, y.beta, y.v)
    if b[: len(g)] != g:
        return None
    rest = b[len(g):]
    if graph.s(rest[0]) != y.v:
        return None
    return Monomial(x.alpha, y.beta + rest, x.v)


def monomials(graph: DirectedGraph, max_total: int) -> list[Monomial]:
    """All nonzero ``S_alpha S_beta^*`` with ``|alpha| + |beta| <= max_total``."""
    by_len = {n: graph.paths(n) for n in range(max_total + 1)}
    out = []
    for v in graph.vertices:
        out.append(Monomial((), (), v))
    for la in range(max_total + 1):
        for lb in range(max_total + 1 - la):
            if la == lb == 0:
                continue
            for a in by_len[la]:
                for b in by_len[lb]:
                    ends = {graph.r(p[-1]) for p in (a, b) if p}
                    if len(ends) == 1:
                        out.append(Monomial(a, b, ends.pop()))
    return out


StateTable = Mapping[Monomial, float]


def state_table(
    graph: DirectedGraph,
    max_len: int,
    diagonal_value: Callable[[object], float],
) -> dict:
    """Table of ``phi`` on all monomials with ``|alpha|, |beta| <= max_len``.

    ``diagonal_value`` receives a path ``mu`` (or a vertex id for ``p_v``)
    and returns ``phi(S_mu S_mu^*)``.  Off-diagonal entries are zero by
    gauge invariance and the orthogonality of distinct paths.
    """
    table = {}
    paths = {n: graph.paths(n) for n in range(max_len + 1)}
    diag = {}
    for v in graph.vertices:
        table[Monomial((), (), v)] = float(diagonal_value(v))
    for n in range(1, max_len + 1):
        for mu in paths[n]:
            diag[mu] = float(diagonal_value(mu))
    for la in range(max_len + 1):
        for lb in range(max_len + 1):
            for a in paths[la]:
                for b in paths[lb]:
                    if not (a or b):
                        continue
                    ends = {graph.r(p[-1]) for p in (a, b) if p}
                    if len(ends) != 1:
                        continue
                    m = Monomial(a, b, ends.pop())
                    if not a:
                        table[m] = 0.0
                    elif a == b:
                        table[m] = diag[a]
                    else:
                        table[m] = 0.0
    return table


def kms_condition_check(
    graph: DirectedGraph,
    table: StateTable,
    beta: float,
    max_len: int = 3,
) -> float:
    """Largest ``|phi(xy) - e^{-beta deg x} phi(yx)|`` over monomials x, y.

    The test set is every nonzero monomial with ``|alpha| + |beta| <= max_len``;
    products are evaluated exactly and looked up in ``table``.
    """
    tests = monomials(graph, max_len)

    def phi(m: Optional[Monomial]) -> float:
        if m is None:
            return 0.0
        try:
            return table[m]
        except KeyError:
            raise IncompleteStateTable(f"state table has no entry for {m}") from None

    worst = 0.0
    for x in tests:
        factor = math.exp(-beta * x.degree)
        for y in tests:
            lhs = phi(multiply(graph, x, y))
            rhs = phi(multiply(graph, y, x))
            worst = max(worst, abs(lhs - factor * rhs))
    return worst


def positivity_check(graph: DirectedGraph, table: StateTable, max_len: int = 2) -> float:
    """Smallest eigenvalue of the Gram matrix ``phi(w_i^* w_j)`` (should be >= 0)."""
    words = monomials(graph, max_len)
    G = np.zeros((len(words), len(words)))
    for i, a in enumerate(words):
        for j, b in enumerate(words):
            m = multiply(graph, a.adjoint(), b)
            G[i, j] = 0.0 if m is None else table[m]
    return float(np.linalg.eigvalsh(0.5 * (G + G.T)).min())


def exact_gauge_state(graph: DirectedGraph) -> Callable[[object], float]:
    """``phi(S_mu S_mu^*) = h_{r(mu)} r^{-|mu|}`` and ``phi(p_v) = h_v`` with ``|h|_1 = 1``."""
    r, h = vertex_perron(graph.vertex_matrix)

    def value(word) -> float:
        if isinstance(word, str):
            return float(h[graph.vindex(word)])
        return float(h[graph.vindex(graph.r(word[-1]))]) * r ** (-len(word))

    return value
