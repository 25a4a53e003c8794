"""Flat tori: lattice heat traces, trigonometric polynomials and Toeplitz truncations.

The Dirac spectrum of the flat torus ``R^d / 2 pi Z^d`` is indexed by
``m in Z^d`` with eigenvalue ``|m|`` (spinor multiplicity is a constant
factor that cancels in every ratio).  For ``d = 1`` the signed spectrum
``n in Z`` is kept so that ``P_D`` (``n >= 0``) and ``F_D = sign(D)``
(with ``sign(0) = +1``) are nontrivial.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy import linalg, special

from .asymptotics import (
    DixmierReport,
    LimitReport,
    LimitSchedule,
    PoleFit,
    PsiFunction,
    dixmier_trace,
    extended_limit,
    pole_fit,
)
from .errors import CutoffInsufficient, InvalidInput, MatrixTooLarge
from .spectral import ObservableInsertion, SpectralMeasure, gibbs_functional, singular_value_function

MAX_MATRIX = 4096


class TorusSpectrum:
    """Lattice spectrum ``{|m| : m in Z^d, |m| <= R}`` grouped into shells."""

    def __init__(self, d: int, R: int, spinor: bool = True):
        if d < 1:
            raise InvalidInput("dimension must be positive")
        if R < 1:
            raise InvalidInput("cutoff must be at least 1")
        self.d = int(d)
        self.R = int(R)
        self.multiplicity = 2 ** (self.d // 2) if spinor else 1
        sq, counts = self._shells()
        self.squared_norms = sq
        self.counts = counts

    def _shells(self) -> tuple[np.ndarray, np.ndarray]:
        R, d = self.R, self.d
        if d > 3:
            raise InvalidInput("lattice enumeration is implemented for d <= 3")
        if d == 1:
            n = np.arange(R + 1, dtype=np.int64)
            return n * n, np.where(n == 0, 1, 2)
        R2 = R * R
        axis = np.arange(-R, R + 1, dtype=np.int64) ** 2
        hist = np.zeros(R2 + 1, dtype=np.int64)
        inner = np.zeros(1, dtype=np.int64)
        for _ in range(d - 1):
            inner = (inner[:, None] + axis[None, :]).ravel()
            inner = inner[inner <= R2]
        # chunk the outer axis so each bincount sees about R2 values
        step = max(1, (R2 + 1) // max(1, inner.size))
        for lo in range(0, axis.size, step):
            s = (axis[lo:lo + step, None] + inner[None, :]).ravel()
            hist += np.bincount(s[s <= R2], minlength=R2 + 1)
        nz = np.nonzero(hist)[0]
        return nz, hist[nz]

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.sqrt(self.squared_norms.astype(float))

    def point_count(self) -> int:
        return int(self.counts.sum())

    def tail_bound(self, t: float, s: float = 1.0) -> float:
        """Bound on ``sum_{|m| > R} e^{-t |m|^{1/s}}`` from ``#{|m| <= x} <= (3x)^d``."""
        q = 1.0 / s
        a = self.d / q + 1
        u = t * self.R**q
        return self.multiplicity * 3.0**self.d * t ** (-self.d / q) * float(
            special.gammaincc(a, u) * special.gamma(a)
        )

    def heat_trace(self, t: float, s: float = 1.0) -> tuple[float, float]:
        """``sum_m e^{-t |m|^{1/s}}`` over the stored ball with its tail bound."""
        lam = self.eigenvalues ** (1.0 / s)
        val = self.multiplicity * float(np.dot(self.counts, np.exp(-t * lam)))
        return val, self.tail_bound(t, s)

    def measure(self) -> SpectralMeasure:
        return SpectralMeasure(
            self.eigenvalues, np.log(self.counts * float(self.multiplicity))
        )

    def signed_measure(self) -> SpectralMeasure:
        """Signed spectrum ``n in [-R, R]`` (d = 1 only)."""
        if self.d != 1:
            raise InvalidInput("signed spectrum is only available for d = 1")
        n = np.arange(-self.R, self.R + 1, dtype=float)
        return SpectralMeasure(n, np.zeros_like(n))


@dataclass(frozen=True)
class WeylFit:
    exponent: float
    constant: float
    exponent_stderr: float
    fit: PoleFit
    max_relative_tail: float


def weyl_fit(
    spec: TorusSpectrum,
    schedule: Optional[LimitSchedule] = None,
    s: float = 1.0,
    tail_tol: float = 1e-8,
) -> WeylFit:
    """Fit ``Tr e^{-t|D|^{1/s}} ~ c t^{-p}`` as ``t -> 0`` on the truncated lattice."""
    schedule = schedule or LimitSchedule.geometric(0.0, first=0.4, ratio=0.5, n=6)
    worst = 0.0
    vals = []
    for t in schedule.t:
        v, tail = spec.heat_trace(t, s)
        worst = max(worst, tail / v)
        vals.append(v)
    if worst > tail_tol:
        raise CutoffInsufficient(
            f"relative truncation error {worst:.2e} exceeds {tail_tol:g}; raise R"
        )
    fit = pole_fit(vals, schedule)
    return WeylFit(fit.pole_order, fit.residue, fit.order_stderr, fit, worst)


class TrigPolynomial:
    """Finite Fourier series ``a(theta) = sum_k a_k e^{i k.theta}`` on the d-torus."""

    def __init__(self, coeffs: Mapping, d: Optional[int] = None):
        norm = {}
        for k, v in coeffs.items():
            key = (int(k),) if np.isscalar(k) else tuple(int(x) for x in k)
            norm[key] = norm.get(key, 0) + complex(v)
        dims = {len(k) for k in norm}
        if d is None:
            if len(dims) != 1:
                raise InvalidInput("inconsistent frequency dimensions")
            d = dims.pop()
        elif dims and dims != {d}:
            raise InvalidInput("frequency dimension does not match d")
        self.d = d
        self.coeffs = {k: v for k, v in norm.items() if v != 0}

    @classmethod
    def from_json(cls, payload: Mapping) -> "TrigPolynomial":
        try:
            items = {tuple(c["k"]): complex(c.get("re", 0.0), c.get("im", 0.0)) for c in payload["coeffs"]}
        except (KeyError, TypeError) as exc:
            raise InvalidInput(f"malformed trig polynomial: {exc}") from exc
        return cls(items)

    def to_json(self) -> dict:
        return {
            "coeffs": [
                {"k": list(k), "re": v.real, "im": v.imag} for k, v in sorted(self.coeffs.items())
            ]
        }

    @classmethod
    def constant(cls, c: float, d: int = 1) -> "TrigPolynomial":
        return cls({(0,) * d: c}, d)

    @classmethod
    def random_real(cls, d: int, K: int, rng: np.random.Generator) -> "TrigPolynomial":
        """Random real polynomial with frequencies in ``[-K, K]^d``."""
        coeffs = {}
        for k in np.ndindex(*(2 * K + 1,) * d):
            k = tuple(int(x) - K for x in k)
            neg = tuple(-x for x in k)
            if neg in coeffs:
                coeffs[k] = np.conj(coeffs[neg])
            elif k == neg:
                coeffs[k] = complex(rng.normal())
            else:
                coeffs[k] = complex(rng.normal(), rng.normal())
        return cls(coeffs, d)

    def __getitem__(self, k) -> complex:
        key = (int(k),) if np.isscalar(k) else tuple(k)
        return self.coeffs.get(key, 0j)

    @property
    def zero_mode(self) -> complex:
        return self.coeffs.get((0,) * self.d, 0j)

    @property
    def is_real(self) -> bool:
        return all(abs(v - np.conj(self[tuple(-x for x in k)])) < 1e-14 for k, v in self.coeffs.items())

    @property
    def max_frequency(self) -> int:
        return max((max(abs(x) for x in k) for k in self.coeffs), default=0)

    def l1_norm(self) -> float:
        return float(sum(abs(v) for v in self.coeffs.values()))

    def __mul__(self, other: "TrigPolynomial") -> "TrigPolynomial":
        out: dict = {}
        for k1, v1 in self.coeffs.items():
            for k2, v2 in other.coeffs.items():
                k = tuple(a + b for a, b in zip(k1, k2))
                out[k] = out.get(k, 0) + v1 * v2
        return TrigPolynomial(out, self.d)

    def __call__(self, *theta):
        theta = [np.asarray(x, dtype=float) for x in theta]
        total = 0j
        for k, v in self.coeffs.items():
            phase = sum(ki * th for ki, th in zip(k, theta))
            total = total + v * np.exp(1j * phase)
        return total

    def grid_mean(self, n: int = 64) -> complex:
        """Normalised integral by an equispaced rule (exact for degree < n)."""
        th = 2 * np.pi * np.arange(n) / n
        grids = np.meshgrid(*([th] * self.d), indexing="ij")
        return complex(np.mean(self(*grids)))


def _insertion(base: SpectralMeasure, value: float, label: str) -> ObservableInsertion:
    # the diagonal of a multiplication operator in the Fourier basis is the zero mode
    return ObservableInsertion(base, np.full(base.lam.size, value), label, max(abs(value), 1.0))


def torus_trace_state(
    spec: TorusSpectrum,
    a: TrigPolynomial,
    t: Optional[float] = None,
    schedule: Optional[LimitSchedule] = None,
    positive_only: bool = True,
):
    """``Tr(P_D M_a e^{-t|D|}) / Tr(P_D e^{-t|D|})``, at one ``t`` or extrapolated to 0."""
    if a.d != spec.d:
        raise InvalidInput("dimension mismatch between spectrum and polynomial")
    base = spec.signed_measure() if spec.d == 1 else spec.measure()
    pos = positive_only and spec.d == 1
    c = a.zero_mode

    def at(tt: float) -> complex:
        re = gibbs_functional(_insertion(base, c.real, "Re a"), base, tt, None, pos).value
        im = gibbs_functional(_insertion(base, c.imag, "Im a"), base, tt, None, pos).value
        return complex(re, im)

    if schedule is None:
        return at(1.0 if t is None else t)
    vals = [at(tt) for tt in schedule.t]
    re = extended_limit([v.real for v in vals], schedule, atol=1e-12)
    im = extended_limit([v.imag for v in vals], schedule, atol=1e-12)
    return complex(re.limit, im.limit)


@dataclass(frozen=True)
class FDSymmetryReport:
    fd_ratios: tuple
    positive_ratios: tuple
    full_ratios: tuple
    decay_order: float
    fd_limit: LimitReport
    positive_limit: float
    full_limit: float
    zero_mode: complex

    def to_json(self) -> dict:
        return {
            "fd_ratios": list(self.fd_ratios),
            "positive_ratios": list(self.positive_ratios),
            "full_ratios": list(self.full_ratios),
            "decay_order": self.decay_order,
            "fd_limit": self.fd_limit.to_json(),
            "positive_limit": self.positive_limit,
            "full_limit": self.full_limit,
            "zero_mode": [self.zero_mode.real, self.zero_mode.imag],
        }


def fd_symmetry_check(
    spec: TorusSpectrum,
    a: TrigPolynomial,
    schedule: Optional[LimitSchedule] = None,
    odd_perturbation: float = 0.0,
) -> FDSymmetryReport:
    """Decay of ``Tr(F_D M_a e^{-t|D|}) / Tr(e^{-t|D|})`` as ``t -> 0`` (d = 1).

    ``odd_perturbation = delta`` reweights mode ``n`` by ``1 + delta sign(n)``,
    which breaks the sign symmetry and serves as a negative control.
    """
    if spec.d != 1:
        raise InvalidInput("the F_D symmetry check uses the signed d = 1 spectrum")
    schedule = schedule or LimitSchedule.geometric(0.0, first=0.4, ratio=0.5, n=8, policy="richardson")
    n = np.arange(-spec.R, spec.R + 1, dtype=float)
    sign = np.where(n >= 0, 1.0, -1.0)
    w = 1.0 + odd_perturbation * sign
    if np.any(w < 0):
        raise InvalidInput("perturbation makes weights negative")
    c = a.zero_mode.real
    fd, pos, full = [], [], []
    for t in schedule.t:
        if 2 * spec.tail_bound(t) > 1e-10 * spec.heat_trace(t)[0]:
            raise CutoffInsufficient(f"cutoff R={spec.R} too small for t={t:g}")
        e = w * np.exp(-t * np.abs(n))
        Z = e.sum()
        fd.append(c * float(np.dot(sign, e)) / Z)
        pos.append(c * float(e[n >= 0].sum()) / float(e[n >= 0].sum()))
        full.append(c * Z / Z)
    fd = np.array(fd)
    ts = schedule.t
    mag = np.abs(fd)
    if np.all(mag > 0):
        slope = np.polyfit(np.log(ts), np.log(mag), 1)[0]
    else:
        slope = math.inf
    lim = extended_limit(fd, schedule, rtol=1e-6, atol=1e-9)
    return FDSymmetryReport(
        tuple(map(float, fd)), tuple(pos), tuple(full), float(slope), lim,
        float(pos[-1]), float(full[-1]), a.zero_mode,
    )


@dataclass(frozen=True)
class CommutatorReport:
    rank: int
    rank_bound: int
    max_singular_value: float
    norm_bound: float

    @property
    def passed(self) -> bool:
        return self.rank <= self.rank_bound and self.max_singular_value <= self.norm_bound * (1 + 1e-12)


def fd_commutator(a: TrigPolynomial, N: int) -> CommutatorReport:
    """Rank and norm of ``[F_D, M_a]`` on modes ``-N..N`` (d = 1)."""
    if a.d != 1:
        raise InvalidInput("commutator check is for d = 1")
    n = np.arange(-N, N + 1)
    sgn = np.where(n >= 0, 1, -1)
    diff = n[:, None] - n[None, :]
    A = np.zeros(diff.shape, dtype=complex)
    for (k,), v in a.coeffs.items():
        A[diff == k] = v
    C = (sgn[:, None] - sgn[None, :]) * A
    sv = linalg.svdvals(C)
    rank = int(np.sum(sv > 1e-10 * max(1.0, sv.max(initial=0.0))))
    return CommutatorReport(rank, 2 * a.max_frequency, float(sv.max(initial=0.0)), 2 * a.l1_norm())


def toeplitz_dirac_matrix(a: TrigPolynomial, N: int) -> np.ndarray:
    """``P_D M_a (1 + D^2)^{-1/2}`` on modes ``0..N-1``: entries ``a_{m-n} / sqrt(1 + n^2)``."""
    if N > MAX_MATRIX:
        raise MatrixTooLarge(f"N={N} exceeds the limit {MAX_MATRIX}")
    n = np.arange(N)
    diff = n[:, None] - n[None, :]
    real = a.is_real
    T = np.zeros((N, N), dtype=float if real else complex)
    for (k,), v in a.coeffs.items():
        if abs(k) < N:
            T[diff == k] = v.real if real else v
    return T / np.sqrt(1.0 + n.astype(float) ** 2)[None, :]


@dataclass(frozen=True)
class DixmierComparison:
    N: int
    value: float
    error_estimate: float
    converged: bool
    target: float
    relative_deviation: float
    normalization: str
    report: DixmierReport

    def to_json(self) -> dict:
        return {
            "N": self.N,
            "value": self.value,
            "error_estimate": self.error_estimate,
            "converged": self.converged,
            "target": self.target,
            "relative_deviation": self.relative_deviation,
            "normalization": self.normalization,
            "cesaro": list(self.report.cesaro),
            "points": list(self.report.points),
        }


def default_dixmier_schedule(N: int) -> LimitSchedule:
    return LimitSchedule.to_infinity(np.geomspace(N / 64, N / 2, 8), order=1)


def dixmier_vs_state(
    a: TrigPolynomial,
    N: int,
    schedule: Optional[LimitSchedule] = None,
    twisted: bool = False,
) -> DixmierComparison:
    """Dixmier trace of ``P_D M_a (1+D^2)^{-1/2}`` against the zero mode of ``a`` (d = 1).

    The singular values of the truncated operator are fed to the
    Cesàro-ratio extrapolation with ``psi(t) = 1/(1+t)``; the unperturbed
    sequence ``1/sqrt(1+n^2)`` is asymptotic to this psi with constant
    one, so no rescaling is applied.
    """
    if a.d != 1:
        raise InvalidInput("Dixmier comparison is for d = 1")
    if N > MAX_MATRIX:
        raise MatrixTooLarge(f"N={N} exceeds the limit {MAX_MATRIX}")
    grid_min = float(np.min(np.real(a(2 * np.pi * np.arange(512) / 512))))
    if grid_min < -1e-12 or not a.is_real:
        raise InvalidInput("a must be real and nonnegative")
    sv = linalg.svdvals(toeplitz_dirac_matrix(a, N))
    mu = singular_value_function(sv)
    schedule = schedule or default_dixmier_schedule(N)
    rep = dixmier_trace(mu, PsiFunction.inverse_linear(), schedule, twisted=twisted, rtol=0.05)
    target = a.zero_mode.real
    dev = abs(rep.value - target) / abs(target)
    return DixmierComparison(
        N, rep.value, rep.error_estimate, rep.converged, target, dev,
        "psi(t)=1/(1+t), Psi(t)=log(1+t), mu(t,(1+D^2)^(-1/2) P_D) ~ psi(t) with constant 1",
        rep,
    )
