import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kmsheat.asymptotics import (
    LimitSchedule,
    PsiFunction,
    ScaledHarmonic,
    dixmier_trace,
    extended_limit,
    extrapolate,
    karamata_heat,
    pole_fit,
    regular_variation_diagnostics,
)
from kmsheat.errors import (
    DivergentSum,
    InsufficientSamples,
    InvalidInput,
    NotDivergent,
    ScheduleExceedsData,
)
from kmsheat.spectral import SingularValueFunction, singular_value_function


# ---------------------------------------------------------------- schedules

def test_schedule_needs_four_samples():
    with pytest.raises(InsufficientSamples):
        LimitSchedule(0.0, (0.3, 0.2, 0.1))


@pytest.mark.parametrize("samples", [(0.1, 0.2, 0.3, 0.4), (0.4, 0.3, 0.3, 0.1), (0.4, 0.2, 0.1, -0.1)])
def test_schedule_rejects_bad_offsets(samples):
    with pytest.raises(InvalidInput):
        LimitSchedule(0.0, samples)


def test_schedule_rejects_unknown_policy():
    with pytest.raises(InvalidInput):
        LimitSchedule.geometric(0.0, policy="median")


def test_geometric_schedule_points():
    sch = LimitSchedule.geometric(1.0, 0.4, 0.5, 5)
    assert np.allclose(sch.t, 1.0 + 0.4 * 0.5 ** np.arange(5))


# ---------------------------------------------------------------- limits

@pytest.mark.parametrize("policy", ["pole_residue_fit", "richardson", "plain_tail_average"])
def test_affine_function_limit(policy):
    sch = LimitSchedule.geometric(0.0, policy=policy, order=1)
    rep = extended_limit(lambda t: 3 + t, sch, rtol=0.0, atol=0.05 if policy == "plain_tail_average" else 1e-9)
    assert rep.limit == pytest.approx(3.0, abs=0.05 if policy == "plain_tail_average" else 1e-12)
    assert rep.converged


def test_o2_state_near_log2():
    # phi_t(S_e S_e*) on O_2 equals e^{-t} in closed form
    rep = extended_limit(lambda t: math.exp(-t), LimitSchedule.geometric(math.log(2)))
    assert rep.converged
    assert rep.limit == pytest.approx(0.5, rel=1e-6)
    assert abs(rep.limit - 0.5) <= rep.error_estimate


def test_oscillation_is_not_converged():
    rep = extended_limit(lambda t: math.sin(1 / t), LimitSchedule.geometric(0.0, 0.4, 0.5, 10))
    assert not rep.converged


def test_sample_values_must_match_schedule():
    with pytest.raises(InvalidInput):
        extended_limit([1.0, 2.0], LimitSchedule.geometric(0.0))


def test_limit_report_json():
    rep = extended_limit(lambda t: 1 + t, LimitSchedule.geometric(0.0))
    d = rep.to_json()
    assert set(d) == {"limit", "stderr", "converged", "policy", "samples"}
    assert len(d["samples"]) == 8


def test_extrapolate_rejects_nan():
    with pytest.raises(InvalidInput):
        extrapolate([4, 3, 2, 1], [1, 2, float("nan"), 3])


@settings(max_examples=50, deadline=None)
@given(st.floats(-5, 5), st.floats(-3, 3), st.floats(-3, 3))
def test_richardson_exact_on_quadratics(a, b, c):
    sch = LimitSchedule.geometric(0.0, policy="richardson")
    rep = extended_limit(lambda t: a + b * t + c * t * t, sch)
    assert rep.limit == pytest.approx(a, abs=1e-9)


# ---------------------------------------------------------------- pole fits

def test_pole_fit_simple_pole():
    g = lambda t: 1 / (1 - 2 * math.exp(-t))
    pf = pole_fit(g, LimitSchedule.geometric(math.log(2), 0.05, 0.5, 10), order=3)
    # 1/(1 - e^{-eps}) ~ 1/eps: residue 1, order 1
    assert pf.pole_order == pytest.approx(1.0, abs=1e-3)
    assert pf.residue == pytest.approx(1.0, rel=1e-3)


def test_pole_fit_double_pole():
    pf = pole_fit(lambda t: 2.0 / t**2, LimitSchedule.geometric(0.0))
    assert pf.pole_order == pytest.approx(2.0, abs=1e-9)
    assert pf.residue == pytest.approx(2.0, rel=1e-9)


def test_pole_fit_bounded_function():
    with pytest.raises(NotDivergent):
        pole_fit(lambda t: 2.0 + t, LimitSchedule.geometric(0.0))


# ---------------------------------------------------------------- psi catalogue

@pytest.mark.parametrize("psi", [PsiFunction.inverse_linear(), PsiFunction.log_over_linear(),
                                 PsiFunction.inverse_log_power(1.0), PsiFunction.inverse_linear(3.0)])
def test_psi_inverse_roundtrip(psi):
    t = np.array([3.0, 10.0, 1e3, 1e8])
    assert np.allclose(psi.inverse(psi(t)), t, rtol=1e-8)


def test_psi_primitives():
    t = np.array([1.0, 10.0, 100.0])
    assert np.allclose(PsiFunction.inverse_linear().Psi(t), np.log1p(t))
    assert np.allclose(PsiFunction.inverse_linear(2.0).Psi(t), 2 * np.log1p(t))
    num = [math.fsum(np.diff(np.linspace(0, x, 200001)) * (1 / (1 + np.linspace(0, x, 200001)[:-1] + x / 400000)))
           for x in t]
    assert np.allclose(PsiFunction.inverse_linear().Psi(t), num, rtol=1e-6)


def test_psi_rejects_bad_tag():
    with pytest.raises(InvalidInput):
        PsiFunction("exponential")
    with pytest.raises(InvalidInput):
        PsiFunction("inverse_linear", scale=-1.0)


@pytest.mark.parametrize("psi", [PsiFunction.inverse_linear(), PsiFunction.log_over_linear()])
def test_index_minus_one_catalogue_passes_all_conditions(psi):
    rep = regular_variation_diagnostics(psi, -1.0)
    assert rep.index_pass and rep.exp2_pass and rep.invas_pass and rep.passed
    assert rep.invas_constant == pytest.approx(1.0, rel=0.02)
    for a, v in rep.exp2_expected.items():
        assert rep.exp2_limits[a] == pytest.approx(v, rel=0.02)


def test_inverse_linear_exp2_limits_are_alpha_powers():
    rep = regular_variation_diagnostics(PsiFunction.inverse_linear(), -1.0)
    # alpha psi(t^alpha) t^{alpha-1} / psi(t) -> alpha exactly for psi = 1/(1+t)
    assert rep.exp2_limits["0.5"] == pytest.approx(0.5, rel=1e-6)
    assert rep.exp2_limits["2.0"] == pytest.approx(2.0, rel=1e-6)


def test_slowly_varying_psi_fails_exp2():
    rep = regular_variation_diagnostics(PsiFunction.inverse_log_power(1.0), 0.0)
    assert rep.index_pass
    assert not rep.exp2_pass


def test_wrong_index_hypothesis_fails():
    rep = regular_variation_diagnostics(PsiFunction.inverse_linear(), -0.5)
    assert not rep.index_pass and not rep.passed


# ---------------------------------------------------------------- Dixmier

def harmonic_steps(c, n):
    return singular_value_function(c / (1 + np.arange(n)))


@pytest.mark.parametrize("c", [1.0, 2.0])
def test_dixmier_harmonic(c):
    mu = harmonic_steps(c, 1 << 20)
    sch = LimitSchedule.to_infinity(np.geomspace(1e3, 1e6, 6), order=1)
    rep = dixmier_trace(mu, PsiFunction.inverse_linear(), sch, rtol=0.01)
    assert rep.value == pytest.approx(c, rel=0.01)
    assert rep.converged


def test_dixmier_twisted_mean_agrees():
    mu = harmonic_steps(1.0, 1 << 20)
    sch = LimitSchedule.to_infinity(np.geomspace(1e3, 1e6, 6), order=1)
    rep = dixmier_trace(mu, PsiFunction.inverse_linear(), sch, twisted=True, rtol=0.02)
    assert rep.converged
    assert rep.value == pytest.approx(1.0, rel=0.02)


def test_dixmier_schedule_beyond_data():
    mu = harmonic_steps(1.0, 1000)
    with pytest.raises(ScheduleExceedsData):
        dixmier_trace(mu, PsiFunction.inverse_linear(),
                      LimitSchedule.to_infinity([10, 100, 1000, 1e4]))


def test_dixmier_requires_infinity_schedule():
    with pytest.raises(InvalidInput):
        dixmier_trace(harmonic_steps(1.0, 100), PsiFunction.inverse_linear(),
                      LimitSchedule.geometric(0.0))


def alternating_blocks(top_decade=9):
    """Decreasing step function close to c(s)/s where c alternates on doubling log blocks.

    On decades [10^{2^j}, 10^{2^{j+1}}) the steps follow a geometric grid that
    is coarse (ratio e) for even j and fine (ratio e^{0.01}) for odd j.  A
    coarse grid captures the fraction (e-1)/e of the log length while a fine
    one captures almost all of it, so the Cesaro ratio swings between two
    values and never settles.
    """
    edges = [0.0, 10.0]
    for j in range(top_decade):
        lo, hi = 2.0**j, 2.0**(j + 1)
        step = 1.0 if j % 2 == 0 else 0.01
        u = np.arange(lo * math.log(10), hi * math.log(10), step)[1:]
        edges.extend(np.exp(u))
        edges.append(10.0**hi)
    b = np.unique(np.array(edges))
    vals = 1.0 / b[1:]
    return SingularValueFunction(b, vals)


def test_dixmier_non_measurable_sequence_is_flagged():
    mu = alternating_blocks(8)
    pts = [10.0**(2.0**j) for j in range(3, 9)]
    sch = LimitSchedule.to_infinity(pts, order=1)
    rep = dixmier_trace(mu, PsiFunction.inverse_linear(), sch, rtol=0.01)
    assert not rep.converged
    # the sampled Cesaro ratios alternate up and down
    d = np.diff(rep.cesaro)
    assert np.all(d[1:] * d[:-1] < 0)


# ---------------------------------------------------------------- Karamata

KARAMATA_SCHEDULE = LimitSchedule.to_infinity(np.geomspace(1e2, 1e4, 6), order=1)


@pytest.mark.parametrize("q,tol", [(1.0, 0.02), (0.5, 0.05), (2.0, 0.05)])
def test_karamata_harmonic(q, tol):
    rep = karamata_heat(ScaledHarmonic(1.0), q, KARAMATA_SCHEDULE)
    assert rep.limit == pytest.approx(1.0, abs=tol)


def test_karamata_scaled_sequence():
    rep = karamata_heat(ScaledHarmonic(2.0), 1.0, KARAMATA_SCHEDULE)
    assert rep.deviation < 0.02


def test_harmonic_heat_sum_against_direct_sum():
    # q = 1, t = 50: terms exp(-(1+n)/50) form a geometric series
    val, tail = ScaledHarmonic(1.0).heat_sum(1.0, 50.0, n_explicit=1000)
    exact = math.exp(-1 / 50) / (1 - math.exp(-1 / 50))
    assert abs(val - exact) <= tail + 1e-9


def test_karamata_finite_rank_needs_psi():
    mu = singular_value_function(1 / (1 + np.arange(100)))
    with pytest.raises(InvalidInput):
        karamata_heat(mu, 1.0, KARAMATA_SCHEDULE)


def test_karamata_unknown_sequence():
    with pytest.raises(DivergentSum):
        karamata_heat(lambda n: 1 / (1 + n), 1.0, KARAMATA_SCHEDULE)


def test_karamata_rejects_nonpositive_q():
    with pytest.raises(InvalidInput):
        karamata_heat(ScaledHarmonic(), 0.0, KARAMATA_SCHEDULE)
