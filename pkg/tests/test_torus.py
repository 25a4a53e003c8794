import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kmsheat.asymptotics import LimitSchedule
from kmsheat.errors import CutoffInsufficient, InvalidInput, MatrixTooLarge
from kmsheat.torus import (
    MAX_MATRIX,
    TorusSpectrum,
    TrigPolynomial,
    dixmier_vs_state,
    fd_commutator,
    fd_symmetry_check,
    toeplitz_dirac_matrix,
    torus_trace_state,
    weyl_fit,
)


def cos_poly(c0=1.0, c1=0.5):
    return TrigPolynomial({(0,): c0, (1,): c1 / 2, (-1,): c1 / 2})


# ---------------------------------------------------------------- lattice spectra

@pytest.mark.parametrize("d,R,count", [(1, 7, 15), (2, 10, 317), (3, 2, 33), (2, 1, 5)])
def test_lattice_point_counts(d, R, count):
    # Gauss circle and sphere counts
    assert TorusSpectrum(d, R, spinor=False).point_count() == count


def test_spinor_multiplicity():
    assert TorusSpectrum(1, 3).multiplicity == 1
    assert TorusSpectrum(2, 3).multiplicity == 2
    assert TorusSpectrum(3, 2).multiplicity == 2


def test_invalid_spectra():
    with pytest.raises(InvalidInput):
        TorusSpectrum(0, 5)
    with pytest.raises(InvalidInput):
        TorusSpectrum(1, 0)
    with pytest.raises(InvalidInput):
        TorusSpectrum(4, 3)
    with pytest.raises(InvalidInput):
        TorusSpectrum(2, 3).signed_measure()


@pytest.mark.parametrize("t", [0.01, 0.1, 1.0])
def test_circle_heat_trace_is_coth(t):
    val, tail = TorusSpectrum(1, 5000).heat_trace(t)
    exact = 1 / math.tanh(t / 2)
    assert abs(val - exact) <= tail + 1e-12 * exact


def test_tail_bound_dominates_true_tail():
    small, big = TorusSpectrum(2, 20), TorusSpectrum(2, 200)
    for t in (0.2, 0.5):
        v_small, tail = small.heat_trace(t)
        v_big, _ = big.heat_trace(t)
        assert v_big - v_small <= tail


def test_weyl_circle():
    wf = weyl_fit(TorusSpectrum(1, 4000))
    assert wf.exponent == pytest.approx(1.0, rel=0.05)
    assert wf.constant == pytest.approx(2.0, rel=0.05)


def test_weyl_plane():
    wf = weyl_fit(TorusSpectrum(2, 3000))
    assert wf.exponent == pytest.approx(2.0, rel=0.05)
    # two spinor components times the area 2 pi of the unit-disc Laplace transform
    assert wf.constant == pytest.approx(4 * math.pi, rel=0.05)


def test_weyl_gaussian_profile():
    # sum_n e^{-t n^2} ~ sqrt(pi / t)
    wf = weyl_fit(TorusSpectrum(1, 4000), s=0.5)
    assert wf.exponent == pytest.approx(0.5, rel=0.01)
    assert wf.constant == pytest.approx(math.sqrt(math.pi), rel=0.01)


def test_weyl_cutoff_too_small():
    with pytest.raises(CutoffInsufficient):
        weyl_fit(TorusSpectrum(1, 20))


# ---------------------------------------------------------------- trig polynomials

def test_trig_polynomial_json_roundtrip():
    a = TrigPolynomial({(0,): 3.0, (1,): 1j, (-2,): 0.5})
    back = TrigPolynomial.from_json(a.to_json())
    assert back.coeffs == a.coeffs
    with pytest.raises(InvalidInput):
        TrigPolynomial.from_json({"coeffs": [{"k": 1}]})


def test_trig_polynomial_accessors():
    a = cos_poly(2.0, 1.0)
    assert a.zero_mode == 2.0 and a.is_real
    assert a.max_frequency == 1
    assert a.l1_norm() == pytest.approx(3.0)
    assert a(0.0) == pytest.approx(3.0)
    assert a(math.pi) == pytest.approx(1.0)
    assert not TrigPolynomial({(1,): 1.0}).is_real


def test_trig_polynomial_dimension_checks():
    with pytest.raises(InvalidInput):
        TrigPolynomial({(0,): 1.0, (1, 1): 1.0})
    with pytest.raises(InvalidInput):
        TrigPolynomial({(1,): 1.0}, d=2)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 2 * math.pi), st.floats(0, 2 * math.pi))
def test_product_is_pointwise(seed, x, y):
    rng = np.random.default_rng(seed)
    a = TrigPolynomial.random_real(2, 2, rng)
    b = TrigPolynomial.random_real(2, 3, rng)
    assert (a * b)(x, y) == pytest.approx(a(x, y) * b(x, y), rel=1e-10, abs=1e-10)


def test_random_real_is_real_valued():
    a = TrigPolynomial.random_real(1, 4, np.random.default_rng(0))
    th = np.linspace(0, 2 * math.pi, 17)
    assert np.max(np.abs(np.imag(a(th)))) < 1e-12


# ---------------------------------------------------------------- trace state

def test_trace_state_constant_and_shifted():
    spec = TorusSpectrum(1, 2000)
    assert torus_trace_state(spec, TrigPolynomial.constant(1.0), t=0.05) == pytest.approx(1.0)
    a = TrigPolynomial({(0,): 3.0, (1,): 1.0})  # 3 + e^{i theta}
    assert torus_trace_state(spec, a, t=0.05) == pytest.approx(3.0)


def test_trace_state_matches_explicit_matrix():
    # Tr(M_a e^{-tD}) / Tr(e^{-tD}) with M_a written out on modes 0..N-1
    a = TrigPolynomial({(0,): 1.5, (2,): 0.3 - 0.2j, (-1,): 0.7})
    N, t = 400, 0.05
    n = np.arange(N)
    diff = n[:, None] - n[None, :]
    Ma = np.zeros((N, N), dtype=complex)
    for (k,), v in a.coeffs.items():
        Ma[diff == k] = v
    w = np.exp(-t * n)
    explicit = np.trace(Ma * w[None, :]) / w.sum()
    assert torus_trace_state(TorusSpectrum(1, 2000), a, t=t) == pytest.approx(explicit, abs=1e-12)


@pytest.mark.parametrize("seed", range(6))
def test_random_polynomials_match_haar_quadrature(seed):
    rng = np.random.default_rng(seed)
    d = 1 + seed % 2
    a = TrigPolynomial.random_real(d, 3, rng)
    spec = TorusSpectrum(d, 2000 if d == 1 else 200)
    assert torus_trace_state(spec, a, t=0.05) == pytest.approx(a.grid_mean(16), abs=1e-12)


def test_trace_state_extrapolated():
    spec = TorusSpectrum(1, 2000)
    sch = LimitSchedule.geometric(0.0, 0.4, 0.5, 6)
    assert torus_trace_state(spec, cos_poly(2.0), schedule=sch) == pytest.approx(2.0, abs=1e-12)


def test_trace_state_dimension_mismatch():
    with pytest.raises(InvalidInput):
        torus_trace_state(TorusSpectrum(2, 10), cos_poly())


# ---------------------------------------------------------------- F_D symmetry

def test_fd_symmetry_decays():
    rep = fd_symmetry_check(TorusSpectrum(1, 20000), cos_poly(2.0))
    assert rep.fd_limit.converged
    assert abs(rep.fd_limit.limit) < 1e-8
    assert rep.decay_order >= 0.9
    assert rep.positive_limit == pytest.approx(2.0) and rep.full_limit == pytest.approx(2.0)


def test_fd_symmetry_odd_perturbation_is_detected():
    rep = fd_symmetry_check(TorusSpectrum(1, 20000), TrigPolynomial.constant(1.0), odd_perturbation=0.1)
    assert rep.fd_limit.limit == pytest.approx(0.1, abs=1e-6)


def test_fd_symmetry_cutoff():
    with pytest.raises(CutoffInsufficient):
        fd_symmetry_check(TorusSpectrum(1, 100), cos_poly())


@pytest.mark.parametrize("k", [1, 2, 5])
def test_commutator_of_single_mode(k):
    rep = fd_commutator(TrigPolynomial({(k,): 1.0}), 40)
    # e^{ik theta} moves exactly k modes across the sign change
    assert rep.rank == k
    assert rep.max_singular_value == pytest.approx(2.0)
    assert rep.passed


def test_commutator_bounds_for_mixed_polynomial():
    a = TrigPolynomial.random_real(1, 3, np.random.default_rng(4))
    rep = fd_commutator(a, 60)
    assert rep.rank <= 6 and rep.passed


# ---------------------------------------------------------------- Dixmier trace

def test_toeplitz_matrix_of_constant_is_diagonal():
    T = toeplitz_dirac_matrix(TrigPolynomial.constant(2.0), 50)
    n = np.arange(50)
    assert np.allclose(T, np.diag(2 / np.sqrt(1 + n**2)))


def test_toeplitz_entries():
    a = TrigPolynomial({(0,): 1.0, (1,): 0.25, (-1,): 0.25})
    T = toeplitz_dirac_matrix(a, 6)
    assert T[3, 2] == pytest.approx(0.25 / math.sqrt(5))
    assert T[2, 3] == pytest.approx(0.25 / math.sqrt(10))
    assert T[0, 2] == 0.0


@pytest.mark.parametrize("a,target", [(TrigPolynomial.constant(2.0), 2.0), (cos_poly(1.0, 1.0), 1.0)])
def test_dixmier_matches_zero_mode(a, target):
    cmp = dixmier_vs_state(a, 1024)
    assert cmp.target == target
    assert cmp.relative_deviation < 0.05
    assert cmp.converged


def test_dixmier_limits():
    with pytest.raises(MatrixTooLarge):
        dixmier_vs_state(TrigPolynomial.constant(1.0), MAX_MATRIX + 1)
    with pytest.raises(MatrixTooLarge):
        toeplitz_dirac_matrix(TrigPolynomial.constant(1.0), MAX_MATRIX + 1)


def test_dixmier_rejects_negative_or_complex_symbol():
    with pytest.raises(InvalidInput):
        dixmier_vs_state(cos_poly(-0.5, 1.0), 64)
    with pytest.raises(InvalidInput):
        dixmier_vs_state(TrigPolynomial({(0,): 1.0, (1,): 0.2}), 64)


def test_dixmier_json():
    d = dixmier_vs_state(TrigPolynomial.constant(1.0), 256).to_json()
    assert d["N"] == 256 and len(d["cesaro"]) == len(d["points"]) == 8
