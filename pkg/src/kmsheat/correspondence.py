"""Cuntz-Pimsner correspondences over functions on a finite set.

A correspondence is presented by a multigraph on the coefficient set
``Y``: each edge ``e`` is a frame vector with right inner product
``(xi_e|xi_f) = delta_ef p_{r(e)}`` and left action ``a xi_e = a(s(e)) xi_e``.
A trace on ``C(Y)`` is a nonnegative vector ``tau``.  With the vertex
matrix ``M[x, y] = #{e : s(e)=x, r(e)=y}``, the induced trace on
``E^{(n)}`` is ``a -> a^T M^n tau`` and the Laca-Neshveyev map is
``F tau = e^{-alpha} M tau``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .asymptotics import LimitReport, LimitSchedule, extended_limit, extrapolate
from .errors import (
    BelowThreshold,
    InvalidInput,
    LNConditionViolated,
    NotCritical,
    ZeroTrace,
)
from .graphs import DirectedGraph, Monomial, state_table
from .spectral import (
    GrowthBound,
    ObservableInsertion,
    SpectralMeasure,
    critical_beta,
    gibbs_functional,
    heat_trace,
)


@dataclass(frozen=True)
class TraceFunctional:
    """Positive trace ``tau(a) = sum_y a(y) weights[y]`` on functions on ``Y``."""

    weights: np.ndarray
    vertices: tuple = ()

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).ravel()
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise InvalidInput("trace weights must be finite and nonnegative")
        object.__setattr__(self, "weights", w)
        if self.vertices and len(self.vertices) != w.size:
            raise InvalidInput("trace weights do not match the coefficient set")

    @property
    def faithful(self) -> bool:
        return bool(np.all(self.weights > 0))

    @property
    def total(self) -> float:
        return float(self.weights.sum())

    @property
    def normalized(self) -> bool:
        return abs(self.total - 1.0) < 1e-12

    def normalize(self) -> "TraceFunctional":
        if self.total == 0:
            raise ZeroTrace("cannot normalise the zero trace")
        return TraceFunctional(self.weights / self.total, self.vertices)

    def __call__(self, a) -> float:
        return float(np.dot(np.asarray(a, dtype=float), self.weights))

    def to_json(self) -> dict:
        return {"weights": {v: float(w) for v, w in zip(self.vertices, self.weights)}}


class GraphCorrespondence:
    """Finitely generated correspondence over ``C(Y)`` given by a multigraph.

    Every vertex needs an outgoing edge (the left action is unital and
    injective).  Vertices without incoming edges are allowed, as they occur
    for non-surjective maps ``y -> g(y)``; ``full`` records whether every
    vertex is hit.
    """

    def __init__(self, graph: DirectedGraph):
        self.graph = graph
        M = graph.vertex_matrix
        if np.any(M.sum(axis=1) == 0):
            raise InvalidInput("every coefficient point needs an outgoing edge")
        self.full = bool(np.all(M.sum(axis=0) > 0))
        self.M = M

    @property
    def coefficients(self) -> tuple:
        return self.graph.vertices

    @property
    def frame_size(self) -> int:
        return len(self.graph.edges)

    @classmethod
    def from_graph(cls, graph: DirectedGraph) -> "GraphCorrespondence":
        return cls(graph)

    @classmethod
    def from_map(cls, points: Sequence, g) -> "GraphCorrespondence":
        """Correspondence of a self-map: one edge ``y -> g(y)`` per point."""
        pts = [str(p) for p in points]
        edges = [(f"{p}>{g(q)}", p, str(g(q))) for p, q in zip(pts, points)]
        return cls(DirectedGraph(pts, edges, require_regular=False))

    @classmethod
    def doubling(cls, n: int = 8) -> "GraphCorrespondence":
        """The map ``y -> 2y`` on ``Z/n``."""
        return cls.from_map(list(range(n)), lambda y: (2 * y) % n)

    @classmethod
    def from_vertex_matrix(cls, M, names=None) -> "GraphCorrespondence":
        return cls(DirectedGraph.from_vertex_matrix(M, names))

    @classmethod
    def cuntz(cls, n: int) -> "GraphCorrespondence":
        return cls(DirectedGraph.cuntz(n))

    @classmethod
    def from_json(cls, payload: Mapping) -> "GraphCorrespondence":
        try:
            verts = payload.get("coefficients", payload.get("vertices"))
            edges = [(e["id"], e["src"], e["dst"]) for e in payload["edges"]]
        except (KeyError, TypeError) as exc:
            raise InvalidInput(f"malformed correspondence: {exc}") from exc
        return cls(DirectedGraph(verts, edges, require_regular=False))

    def trace(self, weights) -> TraceFunctional:
        if isinstance(weights, Mapping):
            w = np.zeros(len(self.coefficients))
            for k, v in weights.items():
                w[self.graph.vindex(str(k))] = float(v)
            weights = w
        return TraceFunctional(np.asarray(weights, dtype=float), self.coefficients)

    def uniform_trace(self) -> TraceFunctional:
        n = len(self.coefficients)
        return self.trace(np.full(n, 1.0 / n))

    def delta(self, v) -> TraceFunctional:
        w = np.zeros(len(self.coefficients))
        w[self.graph.vindex(str(v))] = 1.0
        return self.trace(w)


def _weights(tau) -> np.ndarray:
    return tau.weights if isinstance(tau, TraceFunctional) else np.asarray(tau, dtype=float)


def induced_trace(corr: GraphCorrespondence, tau, a, n: int) -> float:
    """``Tr^{E^(n)}_tau(a) = sum over length-n paths rho of a(s(rho)) tau(r(rho))``.

    Computed as ``a^T M^n tau``; integer inputs stay exact.
    """
    if n < 0:
        raise InvalidInput("tensor power must be nonnegative")
    v = _weights(tau)
    if np.issubdtype(np.asarray(a).dtype, np.integer) and np.all(v == np.round(v)):
        vec = [int(x) for x in v]
        M = corr.M.tolist()
        for _ in range(n):
            vec = [sum(M[x][y] * vec[y] for y in range(len(vec))) for x in range(len(vec))]
        return float(sum(int(ai) * vi for ai, vi in zip(np.asarray(a).tolist(), vec)))
    v = v.copy()
    for _ in range(n):
        v = corr.M @ v
    return float(np.dot(np.asarray(a, dtype=float), v))


def ln_map(corr: GraphCorrespondence, tau, alpha: float, n: int = 1) -> TraceFunctional:
    """``(F^n tau)_x = e^{-alpha n} (M^n tau)_x``."""
    v = _weights(tau).astype(float)
    for _ in range(n):
        v = math.exp(-alpha) * (corr.M @ v)
    return corr.trace(v)


def ln_residual(corr: GraphCorrespondence, tau, alpha: float) -> float:
    """``max_x |F tau - tau|`` for the normalised trace."""
    w = _weights(tau)
    w = w / w.sum()
    return float(np.max(np.abs(math.exp(-alpha) * (corr.M @ w) - w)))


def level_weights(corr: GraphCorrespondence, tau, levels: int) -> tuple[np.ndarray, np.ndarray]:
    """``log (M^n tau)_x`` for ``n <= levels``, rows indexed by n (``-inf`` for zeros)."""
    v = _weights(tau).astype(float)
    if v.sum() <= 0:
        raise ZeroTrace("trace is zero")
    out = np.empty((levels + 1, v.size))
    scale = 0.0
    with np.errstate(divide="ignore"):
        for n in range(levels + 1):
            s = v.sum()
            out[n] = np.log(v) + scale
            if s == 0:
                out[n + 1:] = -np.inf
                break
            v = corr.M @ (v / s)
            scale += math.log(s)
    return out, np.logaddexp.reduce(out, axis=1)


def growth_certificate(corr: GraphCorrespondence, tau, rel_slack: float = 1e-4) -> GrowthBound:
    """Cumulative growth bound for the level weights ``1^T M^n tau``.

    With ``rho`` the spectral radius and ``g = rho (1 + slack)``, the row
    vector ``l = 1^T (I - M/g)^{-1}`` satisfies ``l >= 1`` and
    ``l M <= g l``, hence ``1^T M^n tau <= g^n l.tau``.
    """
    M = corr.M.astype(float)
    rho = float(max(abs(np.linalg.eigvals(M))))
    g = max(rho, 1e-3) * (1 + rel_slack)
    ell = np.linalg.solve((np.eye(M.shape[0]) - M / g).T, np.ones(M.shape[0]))
    if np.any(ell < 1 - 1e-9):
        raise InvalidInput("growth certificate failed (resolvent not positive)")
    K = float(ell @ _weights(tau)) * (1 + 1e-9)
    rate = math.log(g)
    if rate > 0:
        return GrowthBound.from_levels(K, rate)
    return GrowthBound.from_levels(K, rate, slack=rel_slack)


class CPHeatModel:
    """Positive Fock-space spectrum of a correspondence localised at a trace.

    Level ``n`` carries weight ``tau_*(E^(n)) = 1^T M^n tau``; the word
    ``S_mu S_mu^*`` contributes ``(M^{n-|mu|} tau)_{r(mu)}`` on level ``n``.
    """

    def __init__(self, corr: GraphCorrespondence, tau):
        self.corr = corr
        self.tau = _weights(tau)
        self.growth = growth_certificate(corr, self.tau)
        self._cache: dict[int, tuple] = {}

    def _levels(self, R: float) -> int:
        return max(16, int(math.floor(R)) + 1)

    def _data(self, L: int):
        if L not in self._cache:
            self._cache[L] = level_weights(self.corr, self.tau, L)
        return self._cache[L]

    def measure(self, R: float = 64) -> SpectralMeasure:
        L = self._levels(R)
        _, total = self._data(L)
        return SpectralMeasure(np.arange(L + 1, dtype=float), total, L + 0.5, self.growth, self.measure)

    def insertion(self, mu: tuple, nu: tuple = None, R: float = 64) -> ObservableInsertion:
        nu = mu if nu is None else nu
        g = self.corr.graph
        mu, nu = g.check_path(mu), g.check_path(nu)
        base = self.measure(R)
        L = base.lam.size - 1
        logs, total = self._data(L)
        ratio = np.zeros(L + 1)
        if mu == nu:
            k = len(mu)
            if k == 0:
                ratio[:] = 1.0
            else:
                j = g.vindex(g.r(mu[-1]))
                with np.errstate(invalid="ignore"):
                    ratio[k:] = np.exp(logs[: L + 1 - k, j] - total[k:])
        ratio = np.nan_to_num(ratio)
        return ObservableInsertion(
            base, np.clip(ratio, 0, 1), f"S{list(mu)}S{list(nu)}*", 1.0,
            lambda R2: self.insertion(mu, nu, R2),
        )


@dataclass(frozen=True)
class CriticalValue:
    beta: float
    is_critical: bool
    faithful: bool
    spectral_log_radius: float
    log_exponent: float

    def __iter__(self):
        yield self.beta
        yield self.is_critical


def critical_value(corr: GraphCorrespondence, tau, levels: int = 400) -> CriticalValue:
    """Growth rate of ``tau_*(E^(n))`` and divergence of the Poincare-type series at it."""
    w = _weights(tau)
    if w.sum() <= 0:
        raise ZeroTrace("critical value of the zero trace is undefined")
    model = CPHeatModel(corr, w)
    cb = critical_beta(model.measure(levels), search_window=(-50.0, 50.0), levels=levels)
    rho = float(max(abs(np.linalg.eigvals(corr.M.astype(float)))))
    return CriticalValue(cb.beta, cb.diverges_at_beta, bool(np.all(w > 0)), math.log(rho), cb.log_exponent)


@dataclass(frozen=True)
class FixedPoint:
    tau: TraceFunctional
    residual: float
    converged: bool
    components: tuple
    power_iteration: np.ndarray
    cross_check: float


def resolvent_trace(corr: GraphCorrespondence, tau, alpha: float, t: float) -> np.ndarray:
    """``S^t tau = sum_n e^{-tn} F^n tau = (I - e^{-t} F)^{-1} tau``."""
    F = math.exp(-alpha) * corr.M.astype(float)
    return np.linalg.solve(np.eye(F.shape[0]) - math.exp(-t) * F, _weights(tau))


def resolvent_series(corr: GraphCorrespondence, tau, alpha: float, t: float, eps: float = 1e-13):
    """Truncated series for ``S^t tau`` with a certified componentwise tail bound.

    Uses a positive vector ``h`` with ``F h <= g h`` (``g`` slightly above
    the spectral radius of ``F``), so ``F^n tau <= g^n (max tau/h) h``.
    """
    F = math.exp(-alpha) * corr.M.astype(float)
    rho = float(max(abs(np.linalg.eigvals(F))))
    g = max(rho, 1e-6) * (1 + 1e-6)
    q = math.exp(-t) * g
    if q >= 1:
        raise NotCritical(f"series diverges at t={t:g}")
    h = np.linalg.solve(np.eye(F.shape[0]) - F / g, np.ones(F.shape[0]))
    c = float(np.max(_weights(tau) / h))
    N = max(1, int(math.ceil(math.log(eps * (1 - q) / (c * h.max())) / math.log(q))))
    v = _weights(tau).astype(float)
    acc = np.zeros_like(v)
    damp = math.exp(-t)
    for n in range(N):
        acc += v
        v = damp * (F @ v)
    tail = c * h * q**N / (1 - q)
    return acc, tail


def ln_fixed_point(
    corr: GraphCorrespondence,
    alpha: float,
    seed,
    schedule: Optional[LimitSchedule] = None,
    check_critical: bool = True,
) -> FixedPoint:
    """Fixed point of ``F_alpha`` as the normalised limit of ``S^t seed`` as ``t -> 0``.

    Each component is extrapolated separately; the result is renormalised
    and certified by the residual ``|F tau* - tau*|``.  A power iteration
    on ``F`` (when it converges) is reported as a cross-check.
    """
    w = _weights(seed)
    if check_critical:
        cv = critical_value(corr, w)
        if not cv.is_critical or abs(cv.beta - alpha) > 1e-4:
            raise NotCritical(
                f"seed has critical value {cv.beta:.6g} (critical={cv.is_critical}), alpha={alpha:.6g}"
            )
    schedule = schedule or LimitSchedule.geometric(0.0, first=0.4, n=8, policy="richardson")
    samples = [resolvent_trace(corr, w, alpha, t) for t in schedule.t]
    normed = np.array([s / s.sum() for s in samples])
    comps = []
    for j in range(normed.shape[1]):
        comps.append(extended_limit(normed[:, j], schedule, rtol=1e-9, atol=1e-11))
    vec = np.clip(np.array([c.limit for c in comps]), 0.0, None)
    vec = vec / vec.sum()
    F = math.exp(-alpha) * corr.M.astype(float)
    residual = float(np.max(np.abs(F @ vec - vec)))
    # power iteration cross-check on the Cesaro averages (handles periodic F)
    x = w / w.sum()
    avg = np.zeros_like(x)
    burn, steps = 2000, 2000
    for k in range(1, burn + steps + 1):
        x = F @ x
        s = x.sum()
        if s == 0:
            break
        x = x / s
        if k > burn:
            avg += (x - avg) / (k - burn)
    cross = float(np.max(np.abs(avg / avg.sum() - vec))) if avg.sum() > 0 else math.inf
    return FixedPoint(
        corr.trace(vec), residual, all(c.converged for c in comps), tuple(comps), avg, cross
    )


def eigen_fixed_point(corr: GraphCorrespondence, alpha: Optional[float] = None) -> TraceFunctional:
    """Nonnegative eigenvector of ``M`` for its spectral radius (independent oracle)."""
    w, V = np.linalg.eig(corr.M.astype(float))
    target = max(w.real) if alpha is None else math.exp(alpha)
    i = int(np.argmin(np.abs(w - target)))
    v = np.abs(V[:, i].real)
    return corr.trace(v / v.sum())


def kms_state_ln(
    corr: GraphCorrespondence,
    tau,
    alpha: float,
    mu: Sequence[str],
    nu: Sequence[str],
    tol: float = 1e-8,
) -> float:
    """``phi(S_mu S_nu^*) = delta_{|mu|,|nu|} e^{-alpha|mu|} tau((nu|mu)_A)``.

    With the path frame ``(nu|mu)_A = delta_{mu,nu} p_{r(mu)}`` (and ``1``
    for empty words), so the value is ``e^{-alpha|mu|} tau_{r(mu)}``.
    """
    w = _weights(tau)
    if abs(w.sum() - 1) > 1e-12:
        raise InvalidInput("tau must be normalised")
    res = ln_residual(corr, w, alpha)
    if res > tol:
        raise LNConditionViolated(f"Laca-Neshveyev residual {res:.3g} exceeds {tol:g}")
    g = corr.graph
    mu, nu = g.check_path(mu), g.check_path(nu)
    if len(mu) != len(nu) or mu != nu:
        return 0.0
    if not mu:
        return float(w.sum())
    return math.exp(-alpha * len(mu)) * float(w[g.vindex(g.r(mu[-1]))])


def kms_state_table(corr: GraphCorrespondence, tau, alpha: float, max_len: int) -> dict:
    """State table (see :func:`kmsheat.graphs.state_table`) for the LN state of ``tau``."""
    w = _weights(tau)
    g = corr.graph

    def diag(word):
        if isinstance(word, str):
            return float(w[g.vindex(word)])
        return kms_state_ln(corr, w, alpha, word, word)

    return state_table(g, max_len, diag)


def heat_ratio_state(
    corr: GraphCorrespondence,
    tau,
    mu: Sequence[str],
    nu: Sequence[str],
    schedule: Optional[LimitSchedule] = None,
    model: Optional[CPHeatModel] = None,
) -> LimitReport:
    """Extended limit at the critical value of ``Tr(P S_mu S_nu^* e^{-tD}) / Tr(P e^{-tD})``."""
    model = model or CPHeatModel(corr, tau)
    g = corr.graph
    mu, nu = g.check_path(mu), g.check_path(nu)
    if schedule is None:
        beta = critical_value(corr, tau).beta
        schedule = LimitSchedule.geometric(beta, first=0.4, n=8, policy="richardson")
    if mu != nu:
        ts = tuple(schedule.t)
        return LimitReport(0.0, 0.0, True, ts, (0.0,) * len(ts), schedule.policy)
    ins = lambda: model.insertion(mu, nu)
    f = lambda t: gibbs_functional(ins(), model.measure(), t, 1e-13).value
    return extended_limit(f, schedule, rtol=1e-8, atol=1e-10)


@dataclass(frozen=True)
class WatataniIndex:
    """Exact vertex functions ``e^{beta_k}(x)`` = number of length-k paths from x."""

    levels: tuple

    def __getitem__(self, k: int) -> tuple:
        return self.levels[k]


def watatani_index(corr: GraphCorrespondence, k_max: int) -> WatataniIndex:
    """``e^{beta_k} = M e^{beta_{k-1}}`` with ``e^{beta_0} = 1``, in exact integers."""
    M = corr.M.tolist()
    n = len(M)
    cur = [1] * n
    out = [tuple(cur)]
    for _ in range(k_max):
        cur = [sum(M[x][y] * cur[y] for y in range(n)) for x in range(n)]
        out.append(tuple(cur))
    return WatataniIndex(tuple(out))


def enumerate_path_counts(corr: GraphCorrespondence, k: int) -> tuple:
    """Independent count of length-k paths from each vertex by explicit enumeration."""
    g = corr.graph
    counts = []
    for v in g.vertices:
        counts.append(len(g.paths(k, start=v)))
    return tuple(counts)


@dataclass(frozen=True)
class PhiInfinity:
    value: np.ndarray
    converged: bool
    error_estimate: float
    trajectory: tuple


def watatani_phi_infinity(
    corr: GraphCorrespondence,
    mu: Sequence[str],
    nu: Sequence[str],
    k_schedule: Sequence[int] = (8, 16, 24, 32, 40, 48),
    tol: float = 1e-10,
) -> PhiInfinity:
    """``Phi_inf(S_mu S_nu^*) = lim_k Phi_k(S_mu S_nu^*) e^{-beta_k}`` as a vertex function.

    For the path frame ``Phi_k(S_mu S_mu^*)(x) = delta_{x, s(mu)} e^{beta_{k-|mu|}}(r(mu))``.
    Words of nonzero degree and distinct words give zero.  The limit is
    accepted when the last three schedule values agree within ``tol``.
    """
    g = corr.graph
    mu, nu = g.check_path(mu), g.check_path(nu)
    n = len(g.vertices)
    if mu != nu:
        z = np.zeros(n)
        return PhiInfinity(z, True, 0.0, (z,))
    ks = sorted(int(k) for k in k_schedule)
    if ks[0] < len(mu):
        raise InvalidInput("schedule must start beyond the word length")
    W = watatani_index(corr, ks[-1])
    traj = []
    for k in ks:
        v = np.zeros(n)
        if mu:
            x = g.vindex(g.s(mu[0]))
            y = g.vindex(g.r(mu[-1]))
            v[x] = W[k - len(mu)][y] / W[k][x]
        else:
            v[:] = 1.0
        traj.append(v)
    tail = np.array(traj[-3:])
    err = float(np.max(tail.max(axis=0) - tail.min(axis=0)))
    return PhiInfinity(traj[-1], err <= tol, err, tuple(traj))


@dataclass(frozen=True)
class QuasiInvarianceReport:
    max_violation: float
    ln_residual: float
    ln_implied: bool
    per_word: tuple


def quasi_invariance_check(
    corr: GraphCorrespondence,
    tau,
    alpha: float,
    words: Iterable[tuple],
    k_schedule: Sequence[int] = (8, 16, 24, 32, 40, 48),
) -> QuasiInvarianceReport:
    """Compare ``e^{-alpha|mu|} tau((nu|mu)_A)`` with ``lim_k tau(_A(mu|nu e^{beta_{k-|nu|}}) e^{-beta_k})``.

    The left side needs no limit; the right side uses the Phi_inf
    computation.  The report also states whether the LN residual of
    ``tau`` is small, since quasi-invariance implies the LN condition.
    """
    w = _weights(tau)
    g = corr.graph
    per = []
    worst = 0.0
    for mu, nu in words:
        mu, nu = g.check_path(mu), g.check_path(nu)
        if mu == nu and mu:
            lhs = math.exp(-alpha * len(mu)) * w[g.vindex(g.r(mu[-1]))]
        elif mu == nu:
            lhs = float(w.sum())
        else:
            lhs = 0.0
        phi = watatani_phi_infinity(corr, mu, nu, k_schedule)
        rhs = float(np.dot(w, phi.value))
        per.append((tuple(mu), tuple(nu), float(lhs), rhs))
        worst = max(worst, abs(lhs - rhs))
    res = ln_residual(corr, w, alpha)
    return QuasiInvarianceReport(worst, res, res < 1e-8, tuple(per))


@dataclass(frozen=True)
class DPsiTrace:
    value: float
    tail_bound: float
    cutoff: int
    positive_part: float


def dpsi_heat_trace(
    corr: GraphCorrespondence,
    tau,
    t: float,
    with_Qnr: bool = False,
    eps: float = 1e-12,
    max_level: int = 2000,
) -> DPsiTrace:
    """Heat trace of the Fock-space Dirac operator localised at ``tau``.

    The positive part is ``sum_n e^{-tn} tau_*(E^(n))``.  With
    ``with_Qnr`` the full trace adds ``e^{-t(2r-n)} Tr_tau(P_{n,r})`` for
    ``r > max(0, n)``, using
    ``Tr_tau(Q_{n,r}) = sum_v (1^T M^r)_v (tau^T M^{r-n})_v`` and
    ``P_{n,r} = Q_{n,r} - Q_{n,r-1}``.
    """
    w = _weights(tau).astype(float)
    if not with_Qnr:
        model = CPHeatModel(corr, w)
        cv_rate = model.growth.b
        if t <= cv_rate:
            raise BelowThreshold(f"t={t:g} not above the growth rate {cv_rate:g}")
        ht = heat_trace(model.measure(), t, eps)
        return DPsiTrace(ht.value, ht.tail_bound, int(ht.cutoff), ht.value)
    N = corr.frame_size
    if t <= math.log(N):
        raise BelowThreshold(f"t={t:g} must exceed log N = {math.log(N):g}")
    q = N * math.exp(-t)
    tmax = float(np.max(w))

    def tail(R):
        # level m carries at most (m+1) N^m max(tau) of trace
        m = R + 1
        return tmax * (q**m * (m - (m - 1) * q) / (1 - q) ** 2 + q**m / (1 - q))

    R = 0
    while tail(R) > eps:
        R += 1
        if R > max_level:
            raise BelowThreshold("t too close to log N for the level cap")
    M = corr.M.astype(float)
    rows = [np.ones(M.shape[0])]
    cols = [w.copy()]
    for _ in range(R):
        rows.append(rows[-1] @ M)
        cols.append(cols[-1] @ M)  # tau^T M^k

    def trQ(n, r):
        if r < 0 or r - n < 0:
            return 0.0
        return float(rows[r] @ cols[r - n])

    total = 0.0
    positive = 0.0
    for m in range(R + 1):
        lev = trQ(m, m)  # n = r = m
        positive += lev * math.exp(-t * m)
        for r in range(0, m):
            n = 2 * r - m
            p = trQ(n, r) - (trQ(n, r - 1) if r > max(0, n) else 0.0)
            lev += p
        total += lev * math.exp(-t * m)
    return DPsiTrace(total, tail(R), R, positive)
