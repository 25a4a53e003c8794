"""Command line front end: JSON configs in, JSON/CSV reports out.

    kmsheat run --config cfg.json [--out report.json] [--format json|csv]
    kmsheat graph-kms --config cfg.json          # same, tag checked
    kmsheat reproduce-all --out results/ [--only 1,2] [--negative-controls]
    kmsheat schema --out docs/schemas

Exit codes: 0 when every asserted tolerance holds, 2 when a tolerance
fails, 1 on invalid input or a model error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Annotated, Callable, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, ValidationError, model_validator

from . import __version__
from .errors import InvalidInput, KMSHeatError, SchemaError

EXIT_OK, EXIT_ERROR, EXIT_TOLERANCE = 0, 1, 2


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", strict=True)


# ---------------------------------------------------------------------------
# shared payloads


class EdgeSpec(Strict):
    id: str
    src: str
    dst: str


class GraphSpec(Strict):
    """Exactly one of: explicit vertices and edges, ``cuntz`` (loops), ``vertex_matrix``."""

    vertices: Optional[list[str]] = None
    edges: Optional[list[EdgeSpec]] = None
    cuntz: Optional[int] = Field(None, ge=1)
    vertex_matrix: Optional[list[list[int]]] = None

    @model_validator(mode="after")
    def _one_form(self):
        forms = [self.vertices is not None or self.edges is not None,
                 self.cuntz is not None, self.vertex_matrix is not None]
        if sum(forms) != 1:
            raise ValueError("give exactly one of vertices+edges, cuntz, vertex_matrix")
        if forms[0] and (self.vertices is None or self.edges is None):
            raise ValueError("explicit graphs need both vertices and edges")
        return self

    def build(self, require_regular: bool = True):
        from .graphs import DirectedGraph

        if self.cuntz is not None:
            return DirectedGraph.cuntz(self.cuntz)
        if self.vertex_matrix is not None:
            return DirectedGraph.from_vertex_matrix(self.vertex_matrix)
        edges = [(e.id, e.src, e.dst) for e in self.edges]
        return DirectedGraph(self.vertices, edges, require_regular=require_regular)


class MapSpec(Strict):
    points: list[str]
    images: list[str]

    @model_validator(mode="after")
    def _same_length(self):
        if len(self.points) != len(self.images):
            raise ValueError("points and images must have the same length")
        return self


class CorrespondenceSpec(Strict):
    """A graph, a self-map ``points[i] -> images[i]``, or the doubling map on ``Z/n``."""

    graph: Optional[GraphSpec] = None
    map: Optional[MapSpec] = None
    doubling: Optional[int] = Field(None, ge=1)

    @model_validator(mode="after")
    def _one_form(self):
        if sum(x is not None for x in (self.graph, self.map, self.doubling)) != 1:
            raise ValueError("give exactly one of graph, map, doubling")
        return self

    def build(self):
        from .correspondence import GraphCorrespondence

        if self.doubling is not None:
            return GraphCorrespondence.doubling(self.doubling)
        if self.map is not None:
            table = dict(zip(self.map.points, self.map.images))
            return GraphCorrespondence.from_map(self.map.points, lambda y: table[y])
        return GraphCorrespondence(self.graph.build(require_regular=False))


class ScheduleSpec(Strict):
    first: float = Field(0.4, gt=0)
    ratio: float = Field(0.5, gt=0, lt=1)
    n: int = Field(8, ge=4, le=40)
    policy: Literal["pole_residue_fit", "richardson", "plain_tail_average"] = "richardson"
    order: int = Field(2, ge=0)

    def build(self, anchor: float):
        from .asymptotics import LimitSchedule

        return LimitSchedule.geometric(anchor, self.first, self.ratio, self.n,
                                       policy=self.policy, order=self.order)


class CoeffSpec(Strict):
    k: list[int]
    re: float = 0.0
    im: float = 0.0


class TrigPolySpec(Strict):
    coeffs: list[CoeffSpec] = Field(min_length=1)

    def build(self):
        from .torus import TrigPolynomial

        return TrigPolynomial.from_json(self.model_dump())


class BaseConfig(Strict):
    format: Literal["json", "csv"] = "json"
    seed: int = 0


# ---------------------------------------------------------------------------
# experiment configs


class GraphKMSTolerances(Strict):
    state: float = Field(1e-4, gt=0)
    kms: float = Field(1e-8, gt=0)


class BasePointSpec(Strict):
    prefix: list[str] = []
    cycle: list[str] = Field(min_length=1)


class GraphKMSConfig(BaseConfig):
    experiment: Literal["graph-kms"]
    graph: GraphSpec
    base_point: Optional[BasePointSpec] = None
    words: Optional[list[Union[str, list[list[str]]]]] = None
    max_len: int = Field(2, ge=1, le=4)
    kms_max_len: int = Field(2, ge=1, le=3)
    schedule: ScheduleSpec = ScheduleSpec()
    tolerances: GraphKMSTolerances = GraphKMSTolerances()


class FixedPointTolerances(Strict):
    residual: float = Field(1e-8, gt=0)
    oracle: float = Field(1e-8, gt=0)


class CPFixedPointConfig(BaseConfig):
    experiment: Literal["cp-fixed-point"]
    correspondence: CorrespondenceSpec
    alpha: Optional[float] = None
    seed_trace: Optional[dict[str, float]] = None
    schedule: ScheduleSpec = ScheduleSpec()
    tolerances: FixedPointTolerances = FixedPointTolerances()


class CPKMSTolerances(Strict):
    agreement: float = Field(1e-6, gt=0)
    ln_residual: float = Field(1e-8, gt=0)


class CPKMSConfig(BaseConfig):
    experiment: Literal["cp-kms"]
    correspondence: CorrespondenceSpec
    tau: Optional[dict[str, float]] = None
    alpha: Optional[float] = None
    max_len: int = Field(2, ge=0, le=4)
    tolerances: CPKMSTolerances = CPKMSTolerances()


class PSTolerances(Strict):
    critical: float = Field(1e-4, gt=0)
    measure: float = Field(1e-6, gt=0)
    kms: float = Field(1e-8, gt=0)


class PattersonSullivanConfig(BaseConfig):
    experiment: Literal["patterson-sullivan"]
    rank: int = Field(2, ge=2, le=6)
    max_len: int = Field(3, ge=1, le=6)
    kms_depth: int = Field(4, ge=2, le=6)
    coeff_depth: int = Field(2, ge=0, le=4)
    exponent: float = 1.0
    tolerances: PSTolerances = PSTolerances()


class RandomPolySpec(Strict):
    count: int = Field(10, ge=1, le=200)
    K: int = Field(3, ge=0, le=10)


class TorusTolerances(Strict):
    weyl_rel: float = Field(0.05, gt=0)
    fd_limit: float = Field(1e-8, gt=0)
    fd_decay: float = 0.9


class TorusTraceConfig(BaseConfig):
    experiment: Literal["torus-trace"]
    d: int = Field(1, ge=1, le=3)
    R: int = Field(2000, ge=1, le=40000)
    t: float = Field(0.05, gt=0)
    polynomials: list[TrigPolySpec] = []
    random: Optional[RandomPolySpec] = None
    weyl: bool = True
    fd_symmetry: bool = True
    tolerances: TorusTolerances = TorusTolerances()


class DixmierConfig(BaseConfig):
    experiment: Literal["dixmier-compare"]
    polynomial: TrigPolySpec
    N: list[int] = Field([2048, 4096], min_length=1)
    twisted: bool = False
    tolerance: float = Field(0.1, gt=0)


class KaramataConfig(BaseConfig):
    experiment: Literal["karamata"]
    c: float = Field(1.0, gt=0)
    q: list[float] = Field([1.0, 0.5], min_length=1)
    points: list[float] = Field(default_factory=lambda: [float(x) for x in np.geomspace(1e2, 1e4, 6)])
    order: int = Field(1, ge=0)
    tolerance: float = Field(0.05, gt=0)


class PsiSpec(Strict):
    tag: Literal["inverse_linear", "log_over_linear", "inverse_log_power"]
    scale: float = Field(1.0, gt=0)
    s: float = 1.0


class DiagnosticsConfig(BaseConfig):
    experiment: Literal["diagnostics"]
    psi: PsiSpec
    rho: float = -1.0
    u_max: float = Field(690.0, gt=16, le=700)
    rtol: float = Field(0.02, gt=0)
    invas_constant: Optional[float] = None


CONFIG_MODELS = {
    "graph-kms": GraphKMSConfig,
    "cp-fixed-point": CPFixedPointConfig,
    "cp-kms": CPKMSConfig,
    "patterson-sullivan": PattersonSullivanConfig,
    "torus-trace": TorusTraceConfig,
    "dixmier-compare": DixmierConfig,
    "karamata": KaramataConfig,
    "diagnostics": DiagnosticsConfig,
}

ExperimentConfig = Annotated[
    Union[tuple(CONFIG_MODELS.values())], Field(discriminator="experiment")
]
_ADAPTER = TypeAdapter(ExperimentConfig)


def parse_config(payload, expected_tag: Optional[str] = None):
    """Validate a config dict (or JSON text) and return the typed model."""
    if isinstance(payload, (str, bytes)):
        try:
            payload = json.loads(payload)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"config is not valid JSON: {exc}") from None
    if expected_tag is not None and isinstance(payload, dict):
        got = payload.get("experiment")
        if got != expected_tag:
            raise SchemaError(f"config experiment {got!r} does not match subcommand {expected_tag!r}")
    try:
        return _ADAPTER.validate_python(payload)
    except ValidationError as exc:
        lines = [f"{'.'.join(map(str, e['loc'])) or '<root>'}: {e['msg']}" for e in exc.errors()]
        raise SchemaError("config failed validation:\n  " + "\n  ".join(lines)) from None


def config_schemas() -> dict:
    return {tag: model.model_json_schema() for tag, model in CONFIG_MODELS.items()}


# ---------------------------------------------------------------------------
# reports


class Report:
    """Values, certificates and tolerance checks, each tagged with an anchor."""

    def __init__(self, experiment: str, config):
        self.experiment = experiment
        self.config = config
        self.results: dict = {}
        self.checks: list = []

    def check(self, name: str, anchor: str, expected, observed, tolerance, passed: bool) -> None:
        self.checks.append({
            "name": name, "anchor": anchor, "expected": expected,
            "observed": observed, "tolerance": tolerance, "pass": bool(passed),
        })

    def close(self, name, anchor, expected, observed, tol, rel=False) -> None:
        scale = abs(expected) if rel and expected else 1.0
        ok = math.isfinite(observed) and abs(observed - expected) <= tol * scale
        self.check(name, anchor, expected, observed, f"{'rel' if rel else 'abs'} {tol:g}", ok)

    def below(self, name, anchor, observed, tol) -> None:
        self.check(name, anchor, f"< {tol:g}", observed, tol, observed < tol)

    def above(self, name, anchor, observed, tol) -> None:
        self.check(name, anchor, f"> {tol:g}", observed, tol, observed > tol)

    @property
    def passed(self) -> bool:
        return all(c["pass"] for c in self.checks)

    def to_dict(self) -> dict:
        return _clean({
            "experiment": self.experiment,
            "version": __version__,
            "inputs": self.config.model_dump(mode="json"),
            "results": self.results,
            "checks": self.checks,
            "pass": self.passed,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, allow_nan=False) + "\n"

    def to_csv(self) -> str:
        return _csv(["name", "anchor", "expected", "observed", "tolerance", "pass"],
                    [_clean(c) for c in self.checks])


def _clean(x):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_clean(v) for v in x.tolist()]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer, int)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, complex):
        return [_clean(x.real), _clean(x.imag)]
    return x


def _csv(header: list, rows: list) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=header, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({k: json.dumps(v) if isinstance(v, (list, dict)) else v for k, v in r.items()})
    return buf.getvalue()


# ---------------------------------------------------------------------------
# experiments


def _default_base_point(g):
    from .acceptance import _cycle_base_point

    return _cycle_base_point(g)


def run_graph_kms(cfg: GraphKMSConfig, negative_controls: bool) -> Report:
    from .graphs import (
        BasePoint, GraphHeatModel, exact_gauge_state, graph_kms_state,
        kms_condition_check, positivity_check, state_table,
    )

    rep = Report(cfg.experiment, cfg)
    anchor = "gauge KMS state of a primitive graph algebra at beta = log r(A)"
    g = cfg.graph.build()
    y = (BasePoint(tuple(cfg.base_point.prefix), tuple(cfg.base_point.cycle)).validate(g)
         if cfg.base_point else _default_base_point(g))
    model = GraphHeatModel(g, y)
    sched = cfg.schedule.build(model.beta)
    oracle = exact_gauge_state(g)
    cache = {}

    def value(word):
        key = word if isinstance(word, str) else tuple(word)
        if key not in cache:
            w = word if isinstance(word, str) else (tuple(word), tuple(word))
            cache[key] = graph_kms_state(g, y, w, schedule=sched, model=model)
        return cache[key]

    if cfg.words is None:
        words = list(g.vertices) + [(p, p) for n in range(1, cfg.max_len + 1) for p in g.paths(n)]
    else:
        words = [w if isinstance(w, str) else tuple(map(tuple, w)) for w in cfg.words]
    states = []
    for w in words:
        if isinstance(w, str):
            sv, label, exp = value(w), f"p_{w}", oracle(w)
        else:
            if len(w) != 2:
                raise InvalidInput("each word must be a vertex id or a pair [mu, nu]")
            mu, nu = w
            sv = graph_kms_state(g, y, (mu, nu), schedule=sched, model=model)
            label = f"S_{''.join(mu) or 'v'} S_{''.join(nu) or 'v'}*"
            exp = oracle(mu) if mu == nu and mu else (1.0 if mu == nu else 0.0)
        states.append({
            "word": label, "value": sv.value, "error_estimate": sv.error_estimate,
            "converged": sv.converged, "perron_prediction": sv.corrected_prediction,
            "edge_vector_prediction": sv.closed_form_prediction, "anchor": anchor,
        })
        rep.close(f"phi({label})", anchor, exp, sv.value, cfg.tolerances.state)
        rep.check(f"phi({label}) converged", anchor, True, sv.converged, "flag", sv.converged)
    rep.results["beta"] = {"value": model.beta, "anchor": "critical inverse temperature log r(A)"}
    rep.results["states"] = states
    table = state_table(g, 2 * cfg.kms_max_len, lambda w: value(w).value)
    viol = kms_condition_check(g, table, model.beta, cfg.kms_max_len)
    kms_anchor = "KMS condition phi(xy) = e^{-beta deg x} phi(yx)"
    rep.results["kms_violation"] = {"value": viol, "anchor": kms_anchor}
    rep.results["positivity_min_eigenvalue"] = positivity_check(g, table, min(2, cfg.kms_max_len))
    rep.below("KMS violation at beta", kms_anchor, viol, cfg.tolerances.kms)
    if negative_controls:
        v2 = kms_condition_check(g, table, model.beta + 0.1, cfg.kms_max_len)
        rep.above("negative control: KMS violation at beta + 0.1", kms_anchor, v2, 1e-3)
    return rep


def _trace_from(corr, mapping):
    return corr.uniform_trace() if mapping is None else corr.trace(mapping)


def run_cp_fixed_point(cfg: CPFixedPointConfig, negative_controls: bool) -> Report:
    from .correspondence import critical_value, eigen_fixed_point, ln_fixed_point, ln_residual

    rep = Report(cfg.experiment, cfg)
    anchor = "Laca-Neshveyev traces are fixed points of F = e^-alpha M"
    corr = cfg.correspondence.build()
    seed = _trace_from(corr, cfg.seed_trace)
    cv = critical_value(corr, seed)
    alpha = cv.beta if cfg.alpha is None else cfg.alpha
    fp = ln_fixed_point(corr, alpha, seed, cfg.schedule.build(0.0))
    oracle = eigen_fixed_point(corr, alpha)
    dev = float(np.max(np.abs(oracle.weights - fp.tau.weights)))
    rep.results.update({
        "alpha": {"value": alpha, "anchor": "critical value of the seed trace"},
        "critical": cv.is_critical,
        "fixed_point": {"weights": dict(zip(corr.coefficients, fp.tau.weights)), "anchor": anchor},
        "residual": fp.residual,
        "eigenvector_oracle": dict(zip(corr.coefficients, oracle.weights)),
        "power_iteration_deviation": fp.cross_check,
        "full": corr.full,
    })
    rep.below("fixed-point residual", anchor, fp.residual, cfg.tolerances.residual)
    rep.below("deviation from eigenvector oracle", anchor, dev, cfg.tolerances.oracle)
    if negative_controls:
        rng = np.random.default_rng(cfg.seed)
        w = rng.uniform(0.2, 1.0, len(corr.coefficients))
        r = ln_residual(corr, w / w.sum(), alpha)
        rep.above("negative control: residual of a random trace", anchor, r, 1e-3)
    return rep


def run_cp_kms(cfg: CPKMSConfig, negative_controls: bool) -> Report:
    from .asymptotics import LimitSchedule
    from .correspondence import (
        CPHeatModel, critical_value, heat_ratio_state, kms_state_ln, ln_fixed_point,
        ln_residual, quasi_invariance_check,
    )

    rep = Report(cfg.experiment, cfg)
    anchor = "KMS state of an LN trace equals the heat-trace ratio state"
    corr = cfg.correspondence.build()
    if cfg.tau is None:
        seed = corr.uniform_trace()
        alpha = critical_value(corr, seed).beta if cfg.alpha is None else cfg.alpha
        tau = ln_fixed_point(corr, alpha, seed).tau
    else:
        tau = corr.trace(cfg.tau).normalize()
        alpha = critical_value(corr, tau).beta if cfg.alpha is None else cfg.alpha
    res = ln_residual(corr, tau.weights, alpha)
    rep.below("LN residual of tau", anchor, res, cfg.tolerances.ln_residual)
    model = CPHeatModel(corr, tau)
    beta = critical_value(corr, tau).beta
    sched = LimitSchedule.geometric(beta, first=0.4, n=8, policy="richardson")
    g = corr.graph
    words = [p for n in range(cfg.max_len + 1) for p in g.paths(n)]
    rows, worst = [], 0.0
    for mu in words:
        for nu in words:
            a = kms_state_ln(corr, tau, alpha, mu, nu, tol=max(cfg.tolerances.ln_residual, res * 2))
            b = heat_ratio_state(corr, tau, mu, nu, schedule=sched, model=model)
            worst = max(worst, abs(a - b.limit))
            if mu == nu:
                rows.append({"mu": list(mu), "ln_state": a, "heat_ratio": b.limit,
                             "stderr": b.error_estimate, "anchor": anchor})
    qi = quasi_invariance_check(corr, tau, alpha, [(w, w) for w in words])
    rep.results.update({
        "alpha": alpha, "tau": dict(zip(corr.coefficients, tau.weights)),
        "diagonal_states": rows, "max_disagreement": worst,
        "quasi_invariance_violation": qi.max_violation,
    })
    rep.below("max |LN state - heat ratio state|", anchor, worst, cfg.tolerances.agreement)
    rep.below("quasi-invariance violation", "Phi_inf quasi-invariance of LN traces", qi.max_violation, 1e-8)
    if negative_controls:
        rng = np.random.default_rng(cfg.seed)
        w = rng.uniform(0.2, 1.0, len(corr.coefficients))
        q2 = quasi_invariance_check(corr, w / w.sum(), alpha, [(w_, w_) for w_ in words])
        rep.above("negative control: quasi-invariance of a random trace",
                  "Phi_inf quasi-invariance of LN traces", q2.max_violation, 1e-3)
    return rep


def run_patterson_sullivan(cfg: PattersonSullivanConfig, negative_controls: bool) -> Report:
    from .freegroup import (
        FreeGroup, crossed_product_kms_check, exact_cylinder_measure, partition_sums,
        poincare_critical, ps_cylinder_measure, standard_elements,
    )

    rep = Report(cfg.experiment, cfg)
    F = FreeGroup(cfg.rank)
    pc = poincare_critical(F)
    crit_anchor = "critical exponent of the word-length Poincare series"
    rep.results["critical_exponent"] = {"value": pc.beta, "exact": pc.exact, "anchor": crit_anchor}
    rep.close("critical exponent", crit_anchor, pc.exact, pc.beta, cfg.tolerances.critical)
    ps_anchor = "Patterson-Sullivan measure of cylinders"
    rows, worst = [], 0.0
    for n in range(1, cfg.max_len + 1):
        for w in F.words(n):
            lim = ps_cylinder_measure(F, w)
            exact = float(exact_cylinder_measure(F, w))
            worst = max(worst, abs(lim.limit - exact))
            rows.append({"w": w, "value": lim.limit, "stderr": lim.error_estimate, "exact": exact})
    rep.results["cylinders"] = {"rows": rows, "anchor": ps_anchor}
    rep.below("max cylinder deviation", ps_anchor, worst, cfg.tolerances.measure)
    sums = partition_sums(F, cfg.max_len)
    rep.check("partition sums equal 1", ps_anchor, 1, [str(s) for s in sums], "exact", all(s == 1 for s in sums))
    kms_anchor = "KMS_1 state of the boundary crossed product for the RN flow"
    elems = standard_elements(F, cfg.coeff_depth, cfg.seed)
    v = crossed_product_kms_check(F, elems, cfg.kms_depth, cfg.exponent)
    rep.results["kms_violation"] = {"value": v, "exponent": cfg.exponent, "anchor": kms_anchor}
    rep.below("KMS violation", kms_anchor, v, cfg.tolerances.kms)
    if negative_controls:
        v2 = crossed_product_kms_check(F, elems, cfg.kms_depth, cfg.exponent * 1.1)
        rep.above("negative control: exponent scaled by 1.1", kms_anchor, v2, 1e-3)
    return rep


def run_torus_trace(cfg: TorusTraceConfig, negative_controls: bool) -> Report:
    from .torus import TorusSpectrum, TrigPolynomial, fd_symmetry_check, torus_trace_state, weyl_fit

    rep = Report(cfg.experiment, cfg)
    spec = TorusSpectrum(cfg.d, cfg.R)
    polys = [p.build() for p in cfg.polynomials]
    if cfg.random is not None:
        rng = np.random.default_rng(cfg.seed)
        polys += [TrigPolynomial.random_real(cfg.d, cfg.random.K, rng) for _ in range(cfg.random.count)]
    anchor = "normalised trace state equals the zero Fourier mode"
    rows = []
    for i, a in enumerate(polys):
        v = torus_trace_state(spec, a, t=cfg.t)
        rows.append({"index": i, "value": v, "zero_mode": a.zero_mode})
        rep.check(f"polynomial {i}: state = a_0", anchor, a.zero_mode, v, "exact", v == a.zero_mode)
    rep.results["trace_states"] = {"rows": rows, "anchor": anchor}
    if cfg.weyl:
        fit = weyl_fit(spec)
        w_anchor = "Weyl law: heat trace ~ c t^-d"
        rep.results["weyl"] = {"exponent": fit.exponent, "constant": fit.constant,
                               "stderr": fit.exponent_stderr, "anchor": w_anchor}
        rep.close("Weyl exponent", w_anchor, float(cfg.d), fit.exponent, cfg.tolerances.weyl_rel, rel=True)
    if cfg.fd_symmetry and cfg.d == 1:
        fd_anchor = "F_D-twisted heat ratio vanishes as t -> 0"
        one = TrigPolynomial.constant(1.0)
        fd = fd_symmetry_check(spec, one)
        rep.results["fd_symmetry"] = dict(fd.to_json(), anchor=fd_anchor)
        rep.close("F_D ratio limit", fd_anchor, 0.0, fd.fd_limit.limit, cfg.tolerances.fd_limit)
        rep.check("F_D decay order", fd_anchor, f">= {cfg.tolerances.fd_decay}", fd.decay_order,
                  cfg.tolerances.fd_decay, fd.decay_order >= cfg.tolerances.fd_decay)
        if negative_controls:
            bad = fd_symmetry_check(spec, one, odd_perturbation=0.1)
            rep.above("negative control: odd reweighting 0.1", fd_anchor, abs(bad.fd_limit.limit), 1e-3)
    return rep


def run_dixmier(cfg: DixmierConfig, negative_controls: bool) -> Report:
    from .torus import dixmier_vs_state

    rep = Report(cfg.experiment, cfg)
    anchor = "Dixmier trace of P_D M_a (1+D^2)^-1/2 equals a_0"
    a = cfg.polynomial.build()
    rows = []
    for N in sorted(cfg.N):
        r = dixmier_vs_state(a, N, twisted=cfg.twisted)
        rows.append(dict(r.to_json(), anchor=anchor))
    trend = [r["relative_deviation"] for r in rows]
    improving = all(b < a_ for a_, b in zip(trend, trend[1:]))
    rep.results["runs"] = rows
    rep.results["trend"] = {"N": sorted(cfg.N), "relative_deviation": trend, "improving": improving,
                            "note": "deviation shrinks like 1/log N"}
    last = rows[-1]
    rep.close(f"Dixmier value at N={last['N']}", anchor, last["target"], last["value"], cfg.tolerance, rel=True)
    if len(rows) > 1:
        rep.check("monotone improvement in N", anchor, "decreasing", trend, "strict", improving)
    return rep


def run_karamata(cfg: KaramataConfig, negative_controls: bool) -> Report:
    from .asymptotics import LimitSchedule, ScaledHarmonic, karamata_heat

    rep = Report(cfg.experiment, cfg)
    anchor = "heat sum ~ Gamma(1+1/q) psi^-1(t^-1/q) for psi-regular singular values"
    sched = LimitSchedule.to_infinity(cfg.points, order=cfg.order)
    rows = []
    for q in cfg.q:
        r = karamata_heat(ScaledHarmonic(cfg.c), q, sched)
        rows.append(dict(r.to_json(), anchor=anchor))
        rep.close(f"ratio limit q={q:g}", anchor, 1.0, r.limit, cfg.tolerance)
    rep.results["runs"] = rows
    return rep


def run_diagnostics(cfg: DiagnosticsConfig, negative_controls: bool) -> Report:
    from .asymptotics import PsiFunction, regular_variation_diagnostics

    rep = Report(cfg.experiment, cfg)
    psi = PsiFunction(cfg.psi.tag, cfg.psi.scale, cfg.psi.s)
    r = regular_variation_diagnostics(psi, cfg.rho, cfg.u_max, cfg.rtol)
    rep.results["diagnostics"] = dict(r.to_json(), anchor="regular variation, exp2 and invas conditions")
    rep.check("regular variation index", "psi(lam t)/psi(t) -> lam^rho", cfg.rho, r.index_ratios, cfg.rtol, r.index_pass)
    rep.check("exp2 condition", "alpha psi(t^alpha) t^(alpha-1)/psi(t) converges", r.exp2_expected, r.exp2_limits, cfg.rtol, r.exp2_pass)
    ok = r.invas_pass
    if cfg.invas_constant is not None:
        ok = ok and abs(r.invas_constant / cfg.invas_constant - 1) <= cfg.rtol
    rep.check("invas condition", "t^2 psi(t)/psi^-1(1/t) -> c", cfg.invas_constant, r.invas_constant, cfg.rtol, ok)
    return rep


RUNNERS: dict[str, Callable] = {
    "graph-kms": run_graph_kms,
    "cp-fixed-point": run_cp_fixed_point,
    "cp-kms": run_cp_kms,
    "patterson-sullivan": run_patterson_sullivan,
    "torus-trace": run_torus_trace,
    "dixmier-compare": run_dixmier,
    "karamata": run_karamata,
    "diagnostics": run_diagnostics,
}


def run_experiment(cfg, negative_controls: bool = False) -> Report:
    try:
        return RUNNERS[cfg.experiment](cfg, negative_controls)
    except InvalidInput as exc:
        raise SchemaError(f"{cfg.experiment}: {exc}") from exc


# ---------------------------------------------------------------------------
# reproduce-all

SUMMARY_FIELDS = ["criterion", "anchor", "check", "expected", "observed", "tolerance", "pass"]


def reproduce_all(out_dir: Path, only=None, negative: bool = False, echo=print) -> bool:
    from .acceptance import negative_controls, run_criterion, CRITERIA

    out_dir.mkdir(parents=True, exist_ok=True)
    rows, details, ok = [], [], True
    for cid in (only or sorted(CRITERIA)):
        res = run_criterion(cid)
        echo(res.summary_line())
        ok = ok and res.passed
        details.append(dict(res.to_json(), runtime_s=round(res.runtime_s, 3)))
        for c in res.checks:
            cj = c.to_json()
            rows.append({"criterion": cid, "anchor": res.anchor, "check": cj["name"],
                         "expected": cj["expected"], "observed": cj["observed"],
                         "tolerance": cj["tolerance"], "pass": cj["pass"]})
        if not res.within_budget:
            rows.append({"criterion": cid, "anchor": res.anchor, "check": "runtime",
                         "expected": f"< {res.budget_s} s", "observed": round(res.runtime_s, 2),
                         "tolerance": res.budget_s, "pass": False})
    (out_dir / "summary.csv").write_text(_csv(SUMMARY_FIELDS, _clean(rows)))
    (out_dir / "criteria.json").write_text(json.dumps(_clean(details), indent=2, sort_keys=True) + "\n")
    if negative:
        neg = [c.to_json() for c in negative_controls()]
        for c in neg:
            echo(f"[{'FIRED' if c['pass'] else 'MISSED'}] negative control: {c['name']}")
        ok = ok and all(c["pass"] for c in neg)
        (out_dir / "negative_controls.csv").write_text(
            _csv(["name", "expected", "observed", "tolerance", "pass"], _clean(neg)))
    return ok


# ---------------------------------------------------------------------------
# argument parsing


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, type=Path, help="experiment config (JSON)")
    p.add_argument("--out", type=Path, help="report path (default: stdout)")
    p.add_argument("--format", choices=("json", "csv"), help="overrides the config's format field")
    p.add_argument("--seed", type=int, help="overrides the config's seed field")
    p.add_argument("--negative-controls", action="store_true", help="also run perturbed inputs that must fail")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kmsheat", description="KMS states from heat-trace ratios")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run_flags(sub.add_parser("run", help="run the experiment named in the config"))
    for tag in CONFIG_MODELS:
        _add_run_flags(sub.add_parser(tag, help=f"run a {tag} config"))
    rp = sub.add_parser("reproduce-all", help="run the acceptance suite and write a CSV summary")
    rp.add_argument("--out", type=Path, required=True, help="output directory")
    rp.add_argument("--only", help="comma-separated criterion ids")
    rp.add_argument("--negative-controls", action="store_true")
    sp = sub.add_parser("schema", help="write JSON schemas of all configs")
    sp.add_argument("--out", type=Path, help="directory (default: print the combined schema)")
    return parser


def _run_command(args, tag: Optional[str]) -> int:
    try:
        text = args.config.read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_ERROR
    try:
        cfg = parse_config(text, tag)
        updates = {}
        if args.seed is not None:
            updates["seed"] = args.seed
        if args.format is not None:
            updates["format"] = args.format
        cfg = cfg.model_copy(update=updates)
        report = run_experiment(cfg, args.negative_controls)
    except KMSHeatError as exc:
        where = tag or "run"
        print(f"error [{where}] {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    body = report.to_csv() if cfg.format == "csv" else report.to_json()
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(body, encoding="utf-8")
    else:
        sys.stdout.write(body)
    if not report.passed:
        for c in report.checks:
            if not c["pass"]:
                print(f"tolerance failed: {c['name']}: observed {c['observed']}, "
                      f"expected {c['expected']} ({c['tolerance']})", file=sys.stderr)
        trend = report.results.get("trend")
        if trend:
            print(f"trend: {json.dumps(_clean(trend))}", file=sys.stderr)
        return EXIT_TOLERANCE
    return EXIT_OK


def write_schemas(out: Path) -> list:
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for tag, schema in config_schemas().items():
        p = out / f"{tag}.json"
        p.write_text(json.dumps(schema, indent=2, sort_keys=True) + "\n")
        paths.append(p)
    return paths


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "reproduce-all":
        only = None
        if args.only:
            try:
                only = [int(x) for x in args.only.split(",")]
            except ValueError:
                print("error: --only takes comma-separated integers", file=sys.stderr)
                return EXIT_ERROR
        try:
            ok = reproduce_all(args.out, only, args.negative_controls)
        except KeyError as exc:
            print(f"error: unknown criterion {exc}", file=sys.stderr)
            return EXIT_ERROR
        return EXIT_OK if ok else EXIT_TOLERANCE
    if args.command == "schema":
        if args.out:
            for p in write_schemas(args.out):
                print(p)
        else:
            print(json.dumps(_ADAPTER.json_schema(), indent=2, sort_keys=True))
        return EXIT_OK
    return _run_command(args, None if args.command == "run" else args.command)


if __name__ == "__main__":
    sys.exit(main())
