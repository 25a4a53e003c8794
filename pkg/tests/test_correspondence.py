import itertools
import math

import numpy as np
import pytest

from kmsheat.asymptotics import LimitSchedule
from kmsheat.correspondence import (
    CPHeatModel,
    GraphCorrespondence,
    critical_value,
    dpsi_heat_trace,
    eigen_fixed_point,
    enumerate_path_counts,
    heat_ratio_state,
    induced_trace,
    kms_state_ln,
    kms_state_table,
    ln_fixed_point,
    ln_map,
    ln_residual,
    quasi_invariance_check,
    resolvent_series,
    resolvent_trace,
    watatani_index,
    watatani_phi_infinity,
)
from kmsheat.errors import BelowThreshold, InvalidInput, LNConditionViolated, NotCritical, WindowTooNarrow, ZeroTrace
from kmsheat.graphs import kms_condition_check

GOLDEN_SQ = (3 + math.sqrt(5)) / 2
PRIMITIVE = [[2, 1], [1, 1]]


def words_up_to(corr, n):
    g = corr.graph
    out = [()]
    for k in range(1, n + 1):
        out.extend(g.paths(k))
    return out


def brute_induced(corr, tau_w, a, n):
    g = corr.graph
    if n == 0:
        return float(np.dot(a, tau_w))
    return math.fsum(a[g.vindex(g.s(p[0]))] * tau_w[g.vindex(g.r(p[-1]))] for p in g.paths(n))


# ---------------------------------------------------------------- construction

def test_doubling_is_not_full():
    corr = GraphCorrespondence.doubling(8)
    assert not corr.full
    assert corr.frame_size == 8
    assert GraphCorrespondence.cuntz(3).full


def test_correspondence_requires_outgoing_edges():
    from kmsheat.graphs import DirectedGraph
    g = DirectedGraph(["a", "b"], [("e", "a", "b")], require_regular=False)
    with pytest.raises(InvalidInput):
        GraphCorrespondence(g)


def test_trace_from_mapping_and_json():
    corr = GraphCorrespondence.from_vertex_matrix(PRIMITIVE, ["x", "y"])
    tau = corr.trace({"x": 0.25, "y": 0.75})
    assert tau.faithful and tau.normalized
    assert tau.to_json() == {"weights": {"x": 0.25, "y": 0.75}}
    with pytest.raises(InvalidInput):
        corr.trace([-1.0, 2.0])


def test_correspondence_from_json():
    corr = GraphCorrespondence.from_json({"coefficients": ["p"], "edges": [{"id": "a", "src": "p", "dst": "p"}]})
    assert corr.frame_size == 1
    with pytest.raises(InvalidInput):
        GraphCorrespondence.from_json({"coefficients": ["p"]})


# ---------------------------------------------------------------- induced traces

@pytest.mark.parametrize("N,k", [(2, 5), (3, 7), (5, 3)])
def test_induced_trace_cuntz(N, k):
    corr = GraphCorrespondence.cuntz(N)
    assert induced_trace(corr, [1], np.array([1]), k) == N**k


def test_induced_trace_doubling_delta():
    corr = GraphCorrespondence.doubling(8)
    tau = corr.uniform_trace()
    for x in range(8):
        a = np.zeros(8)
        a[x] = 1.0
        for n in (1, 3, 6):
            assert induced_trace(corr, tau, a, n) == pytest.approx(1 / 8)


@pytest.mark.parametrize("corr", [GraphCorrespondence.doubling(8),
                                  GraphCorrespondence.from_vertex_matrix(PRIMITIVE),
                                  GraphCorrespondence.from_vertex_matrix([[2, 0, 0], [1, 1, 0], [0, 1, 1]])])
def test_induced_trace_against_path_enumeration(corr):
    rng = np.random.default_rng(3)
    n = len(corr.coefficients)
    for k in range(5):
        a, tw = rng.random(n), rng.random(n)
        assert induced_trace(corr, tw, a, k) == pytest.approx(brute_induced(corr, tw, a, k), rel=1e-12)


def test_induced_trace_negative_power():
    with pytest.raises(InvalidInput):
        induced_trace(GraphCorrespondence.cuntz(2), [1.0], [1.0], -1)


def test_ln_map_cuntz_scales_by_n():
    corr = GraphCorrespondence.cuntz(3)
    assert ln_map(corr, [0.5], 0.0).weights[0] == pytest.approx(1.5)
    assert ln_map(corr, [1.0], math.log(3)).weights[0] == pytest.approx(1.0)
    assert ln_map(corr, [1.0], 0.0, n=4).weights[0] == pytest.approx(81.0)


# ---------------------------------------------------------------- critical values

@pytest.mark.parametrize("N", [2, 3])
def test_critical_value_cuntz(N):
    corr = GraphCorrespondence.cuntz(N)
    cv = critical_value(corr, [1.0])
    assert cv.beta == pytest.approx(math.log(N), abs=1e-3)
    assert cv.is_critical and cv.faithful
    assert cv.spectral_log_radius == pytest.approx(math.log(N))


def test_critical_value_primitive_matrix():
    corr = GraphCorrespondence.from_vertex_matrix(PRIMITIVE)
    cv = critical_value(corr, corr.uniform_trace())
    assert cv.beta == pytest.approx(math.log(GOLDEN_SQ), abs=1e-3)


def test_critical_value_reducible_matrix():
    corr = GraphCorrespondence.from_vertex_matrix([[2, 0, 0], [1, 1, 0], [0, 1, 1]])
    low = critical_value(corr, corr.delta("2"))
    assert low.beta == pytest.approx(0.0, abs=1e-3)
    assert not low.faithful
    full = critical_value(corr, corr.uniform_trace())
    assert full.beta == pytest.approx(math.log(2), abs=1e-3)
    assert full.faithful


def test_critical_value_zero_trace():
    with pytest.raises(ZeroTrace):
        critical_value(GraphCorrespondence.cuntz(2), [0.0])


# ---------------------------------------------------------------- fixed points

@pytest.mark.parametrize("corr,alpha", [
    (GraphCorrespondence.doubling(8), 0.0),
    (GraphCorrespondence.from_vertex_matrix(PRIMITIVE), math.log(GOLDEN_SQ)),
    (GraphCorrespondence.cuntz(2), math.log(2)),
])
def test_ln_fixed_point_matches_eigenvector(corr, alpha):
    fp = ln_fixed_point(corr, alpha, corr.uniform_trace())
    assert fp.residual < 1e-8
    assert fp.converged
    oracle = eigen_fixed_point(corr, alpha)
    assert np.allclose(fp.tau.weights, oracle.weights, atol=1e-8)
    assert fp.cross_check < 1e-6


def test_doubling_fixed_point_is_uniform():
    # (M tau)(y) = tau(2y), so a fixed point is constant along orbits, and every
    # orbit of y -> 2y on Z/8 reaches 0 within three steps
    corr = GraphCorrespondence.doubling(8)
    fp = ln_fixed_point(corr, 0.0, corr.delta(0))
    assert np.allclose(fp.tau.weights, 1 / 8, atol=1e-8)


def test_doubling_seed_off_the_image_dies():
    # 2y is never odd, so the pushed-forward seed vanishes after one step
    corr = GraphCorrespondence.doubling(8)
    assert ln_map(corr, corr.delta(5), 0.0).total == 0.0
    with pytest.raises(WindowTooNarrow):
        ln_fixed_point(corr, 0.0, corr.delta(5))


def test_primitive_fixed_point_value():
    corr = GraphCorrespondence.from_vertex_matrix(PRIMITIVE)
    fp = ln_fixed_point(corr, math.log(GOLDEN_SQ), [1.0, 0.0])
    phi = (1 + math.sqrt(5)) / 2
    assert fp.tau.weights[0] == pytest.approx(phi / (1 + phi), abs=1e-8)


def test_fixed_point_wrong_alpha():
    corr = GraphCorrespondence.cuntz(2)
    with pytest.raises(NotCritical):
        ln_fixed_point(corr, 1.0, [1.0])


def test_resolvent_matches_series():
    corr = GraphCorrespondence.from_vertex_matrix(PRIMITIVE)
    alpha = math.log(GOLDEN_SQ)
    for t in (0.05, 0.4, 2.0):
        exact = resolvent_trace(corr, [0.3, 0.7], alpha, t)
        approx, tail = resolvent_series(corr, [0.3, 0.7], alpha, t)
        assert np.all(np.abs(exact - approx) <= tail + 1e-12 * np.abs(exact))


def test_resolvent_series_diverges_at_zero_offset():
    corr = GraphCorrespondence.cuntz(2)
    with pytest.raises(NotCritical):
        resolvent_series(corr, [1.0], math.log(2), 0.0)


# ---------------------------------------------------------------- KMS states

@pytest.mark.parametrize("N", [2, 3])
def test_kms_state_ln_cuntz(N):
    corr = GraphCorrespondence.cuntz(N)
    for k in range(4):
        mu = ("e1",) * k
        assert kms_state_ln(corr, [1.0], math.log(N), mu, mu) == pytest.approx(N ** -k)
    assert kms_state_ln(corr, [1.0], math.log(N), ("e1",), ("e1", "e2")) == 0.0
    assert kms_state_ln(corr, [1.0], math.log(N), ("e1",), ("e2",)) == 0.0


def test_kms_state_ln_requires_fixed_point():
    corr = GraphCorrespondence.from_vertex_matrix(PRIMITIVE)
    with pytest.raises(LNConditionViolated):
        kms_state_ln(corr, [0.5, 0.5], math.log(GOLDEN_SQ), (), ())
    with pytest.raises(InvalidInput):
        kms_state_ln(corr, [1.0, 1.0], math.log(GOLDEN_SQ), (), ())


def test_ln_state_table_satisfies_kms():
    corr = GraphCorrespondence.from_vertex_matrix(PRIMITIVE)
    alpha = math.log(GOLDEN_SQ)
    tau = eigen_fixed_point(corr, alpha)
    table = kms_state_table(corr, tau, alpha, 4)
    assert kms_condition_check(corr.graph, table, alpha, 2) < 1e-12


def test_heat_ratio_agrees_with_ln_state_on_doubling():
    corr = GraphCorrespondence.doubling(8)
    tau = corr.uniform_trace()
    fp = ln_fixed_point(corr, 0.0, tau)
    model = CPHeatModel(corr, tau)
    for mu, nu in itertools.product(words_up_to(corr, 2), repeat=2):
        if len(mu) != len(nu):
            continue
        rep = heat_ratio_state(corr, tau, mu, nu, model=model)
        expect = kms_state_ln(corr, fp.tau, 0.0, mu, nu)
        assert rep.limit == pytest.approx(expect, abs=1e-6), (mu, nu)


def test_heat_ratio_agrees_with_ln_state_on_primitive():
    corr = GraphCorrespondence.from_vertex_matrix(PRIMITIVE)
    alpha = math.log(GOLDEN_SQ)
    tau = corr.uniform_trace()
    fixed = eigen_fixed_point(corr, alpha)
    model = CPHeatModel(corr, tau)
    for mu in words_up_to(corr, 2)[1:]:
        rep = heat_ratio_state(corr, tau, mu, mu, model=model)
        assert rep.converged
        assert rep.limit == pytest.approx(kms_state_ln(corr, fixed, alpha, mu, mu), abs=1e-6)


# ---------------------------------------------------------------- Watatani index

def test_watatani_index_big_ints():
    W = watatani_index(GraphCorrespondence.cuntz(2), 100)
    assert W[100] == (2**100,)
    assert isinstance(W[100][0], int)


@pytest.mark.parametrize("corr", [GraphCorrespondence.cuntz(2), GraphCorrespondence.doubling(8),
                                  GraphCorrespondence.from_vertex_matrix(PRIMITIVE)])
def test_watatani_recursion_against_enumeration(corr):
    W = watatani_index(corr, 9)
    for k in range(10):
        assert W[k] == enumerate_path_counts(corr, k)


def test_phi_infinity_cuntz_is_exact():
    for N in (2, 3):
        corr = GraphCorrespondence.cuntz(N)
        for n in range(1, 5):
            mu = ("e1",) * n
            phi = watatani_phi_infinity(corr, mu, mu)
            assert phi.converged
            assert phi.value[0] == N ** -n


def test_phi_infinity_off_diagonal_and_short_schedule():
    corr = GraphCorrespondence.cuntz(2)
    assert watatani_phi_infinity(corr, ("e1",), ("e2",)).value[0] == 0.0
    with pytest.raises(InvalidInput):
        watatani_phi_infinity(corr, ("e1",) * 5, ("e1",) * 5, k_schedule=(3, 8, 16))


def test_phi_infinity_primitive_limit():
    corr = GraphCorrespondence.from_vertex_matrix(PRIMITIVE, ["x", "y"])
    mu = ("x>y#0",)
    phi = watatani_phi_infinity(corr, mu, mu)
    # W_k ~ c h lambda^k, so the ratio tends to h_y / (h_x lambda)
    h = np.array([(1 + math.sqrt(5)) / 2, 1.0])
    assert phi.converged
    assert phi.value[0] == pytest.approx(h[1] / (h[0] * GOLDEN_SQ), abs=1e-10)
    assert phi.value[1] == 0.0


# ---------------------------------------------------------------- quasi-invariance

def test_quasi_invariance_of_fixed_point():
    corr = GraphCorrespondence.from_vertex_matrix(PRIMITIVE)
    alpha = math.log(GOLDEN_SQ)
    tau = eigen_fixed_point(corr, alpha)
    words = [(mu, nu) for mu, nu in itertools.product(words_up_to(corr, 2), repeat=2)]
    rep = quasi_invariance_check(corr, tau, alpha, words)
    assert rep.max_violation < 1e-8
    assert rep.ln_implied


def test_quasi_invariance_fails_off_the_fixed_point():
    corr = GraphCorrespondence.from_vertex_matrix(PRIMITIVE)
    alpha = math.log(GOLDEN_SQ)
    words = [(mu, mu) for mu in words_up_to(corr, 1)]
    rep = quasi_invariance_check(corr, [0.5, 0.5], alpha, words)
    assert rep.max_violation > 1e-3
    assert not rep.ln_implied


# ---------------------------------------------------------------- D_psi heat traces

@pytest.mark.parametrize("N", [2, 3])
def test_dpsi_positive_part_cuntz(N):
    corr = GraphCorrespondence.cuntz(N)
    t = math.log(N) + 0.7
    q = N * math.exp(-t)
    tr = dpsi_heat_trace(corr, [1.0], t)
    assert tr.value == pytest.approx(1 / (1 - q), rel=1e-11)


@pytest.mark.parametrize("N", [2, 3])
def test_dpsi_full_trace_closed_form(N):
    corr = GraphCorrespondence.cuntz(N)
    t = math.log(N) + 1.0
    q = N * math.exp(-t)
    # level m >= 1 carries N^m (1 + m) - (m - 1) N^(m-2)
    direct = 1 + math.fsum(q**m * (1 + m - (m - 1) / N**2) for m in range(1, 600))
    expect = 1 / (1 - q) ** 2 - N**-2 * q**2 / (1 - q) ** 2
    assert direct == pytest.approx(expect, rel=1e-13)
    tr = dpsi_heat_trace(corr, [1.0], t, with_Qnr=True)
    assert tr.value == pytest.approx(expect, rel=1e-11)
    assert tr.positive_part == pytest.approx(1 / (1 - q), rel=1e-11)


def test_dpsi_full_trace_o2_value():
    tr = dpsi_heat_trace(GraphCorrespondence.cuntz(2), [1.0], math.log(2) + 1, with_Qnr=True)
    assert tr.value == pytest.approx(2.418, abs=5e-4)


def test_dpsi_thresholds():
    corr = GraphCorrespondence.cuntz(2)
    with pytest.raises(BelowThreshold):
        dpsi_heat_trace(corr, [1.0], 0.5)
    with pytest.raises(BelowThreshold):
        dpsi_heat_trace(corr, [1.0], 0.5, with_Qnr=True)
