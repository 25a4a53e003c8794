"""Discrete spectral data, certified heat traces and Gibbs ratios.

A :class:`SpectralMeasure` is a list of eigenvalues ``lambda`` with
nonnegative trace weights.  Weights are stored as natural logarithms so
that exponentially growing multiplicities (path counts, sphere sizes)
never overflow.  Truncated spectra carry a ``cutoff``: every eigenvalue
with ``|lambda| <= cutoff`` is present.  Together with a cumulative
growth bound ``sum_{|lambda| <= R} weight <= C exp(b R)`` this yields a
rigorous bound on the neglected part of any heat trace.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import (
    DivergentSeries,
    InvalidInput,
    MissingGrowthBound,
    NegativeWeight,
    TruncationTooShort,
    WindowTooNarrow,
    ZeroDenominator,
)

__all__ = [
    "GrowthBound",
    "SpectralMeasure",
    "ObservableInsertion",
    "SingularValueFunction",
    "HeatTrace",
    "GibbsValue",
    "CriticalBeta",
    "heat_trace",
    "gibbs_functional",
    "critical_beta",
    "singular_value_function",
    "level_measure",
]


@dataclass(frozen=True)
class GrowthBound:
    """Certificate ``sum_{|lambda| <= R} weight <= C * exp(b * R)`` for all R >= 0."""

    C: float
    b: float

    def __post_init__(self):
        if not (self.C > 0 and math.isfinite(self.C) and math.isfinite(self.b)):
            raise InvalidInput(f"invalid growth bound C={self.C}, b={self.b}")

    @classmethod
    def from_levels(cls, K: float, rate: float, slack: float = 0.0) -> "GrowthBound":
        """Cumulative bound from a per-level bound ``w_n <= K exp(rate n)`` on integer levels.

        For ``rate > 0`` the geometric sum gives ``C = K / (1 - exp(-rate))``
        with ``b = rate``.  For ``rate <= 0`` a positive ``slack`` is required
        and ``b = max(rate, 0) + slack``.
        """
        if rate > 0 and slack == 0.0:
            return cls(K / -math.expm1(-rate), rate)
        if slack <= 0:
            raise InvalidInput("a positive slack is needed when rate <= 0")
        b = max(rate, 0.0) + slack
        # sum_{n<=R} K e^{rate n} <= K e^{bR} sum_{m>=0} e^{-slack m}
        return cls(K / -math.expm1(-slack), b)

    def tail(self, t: float, R: float) -> float:
        """Upper bound for ``sum_{|lambda| > R} weight * exp(-t |lambda|)``.

        Abel summation against the cumulative bound gives
        ``t C exp(-(t - b) R) / (t - b)``.
        """
        if t <= self.b:
            return math.inf
        gap = t - self.b
        log_tail = math.log(t * self.C / gap) - gap * R
        return math.exp(log_tail) if log_tail < 700 else math.inf

    def cutoff_for(self, t: float, eps: float) -> float:
        """Smallest R with ``tail(t, R) <= eps``."""
        gap = t - self.b
        return max(0.0, math.log(t * self.C / (gap * eps)) / gap)


LevelGenerator = Callable[[float], "SpectralMeasure"]


@dataclass(frozen=True, eq=False)
class SpectralMeasure:
    """Eigenvalues with nonnegative trace weights ``T(P_lambda)``.

    Parameters
    ----------
    lam : array of float
        Eigenvalues.
    logw : array of float
        Natural log of the weights; ``-inf`` encodes a zero weight.
    cutoff : float
        All eigenvalues with ``|lambda| <= cutoff`` are listed.  ``inf``
        means the list is the complete spectrum.
    growth : GrowthBound, optional
    generator : callable, optional
        ``generator(R)`` returns a measure complete up to at least ``R``.
    """

    lam: np.ndarray
    logw: np.ndarray
    cutoff: float = math.inf
    growth: Optional[GrowthBound] = None
    generator: Optional[LevelGenerator] = field(default=None, repr=False)

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float).ravel()
        logw = np.asarray(self.logw, dtype=float).ravel()
        if lam.shape != logw.shape:
            raise InvalidInput("eigenvalue and weight arrays differ in length")
        if lam.size == 0:
            raise InvalidInput("empty spectrum")
        if np.any(np.isnan(logw)) or np.any(logw == np.inf):
            raise NegativeWeight("weights must be finite and nonnegative")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "logw", logw)

    @classmethod
    def from_weights(cls, lam, weights, **kw) -> "SpectralMeasure":
        w = np.asarray(weights, dtype=float)
        if np.any(w < 0):
            raise NegativeWeight("trace weights must be nonnegative")
        with np.errstate(divide="ignore"):
            return cls(np.asarray(lam, dtype=float), np.log(w), **kw)

    @classmethod
    def from_json(cls, payload) -> "SpectralMeasure":
        """Accept ``[{"lambda":..,"weight":..}, ...]`` or ``{"entries": [...], "growth": {...}}``."""
        if isinstance(payload, dict):
            entries = payload["entries"]
            growth = payload.get("growth")
        else:
            entries, growth = payload, None
        lam = [float(e["lambda"]) for e in entries]
        w = [float(e["weight"]) for e in entries]
        gb = GrowthBound(float(growth["C"]), float(growth["b"])) if growth else None
        cutoff = float(payload.get("cutoff", math.inf)) if isinstance(payload, dict) else math.inf
        return cls.from_weights(lam, w, cutoff=cutoff, growth=gb)

    def to_json(self) -> dict:
        out = {
            "entries": [
                {"lambda": float(l), "weight": float(np.exp(lw))}
                for l, lw in zip(self.lam, self.logw)
            ]
        }
        if self.growth is not None:
            out["growth"] = {"C": self.growth.C, "b": self.growth.b}
        if math.isfinite(self.cutoff):
            out["cutoff"] = self.cutoff
        return out

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.logw)

    def positive_part(self) -> "SpectralMeasure":
        keep = self.lam >= 0
        gen = None
        if self.generator is not None:
            gen = lambda R, g=self.generator: g(R).positive_part()
        return SpectralMeasure(
            self.lam[keep], self.logw[keep], self.cutoff, self.growth, gen
        )

    def extend(self, R: float) -> "SpectralMeasure":
        """Measure complete up to ``R`` (self when already long enough)."""
        if R <= self.cutoff:
            return self
        if self.generator is None:
            raise TruncationTooShort(
                f"spectrum known up to {self.cutoff:g}, need {R:g}"
            )
        out = self.generator(R)
        if out.cutoff < R:
            raise TruncationTooShort("generator returned a short spectrum")
        return out


@dataclass(frozen=True, eq=False)
class ObservableInsertion:
    """Per-eigenvalue insertions ``T(P_lambda B)`` stored relative to the base weights.

    ``ratio[i] = T(P_i B) / T(P_i)`` (zero where the base weight is zero),
    so ``|ratio| <= norm`` expresses ``|T(P B)| <= ||B|| T(P)``.
    """

    base: SpectralMeasure
    ratio: np.ndarray
    label: str = "B"
    norm: float = 1.0
    generator: Optional[Callable[[float], "ObservableInsertion"]] = field(
        default=None, repr=False
    )

    def __post_init__(self):
        r = np.asarray(self.ratio, dtype=float).ravel()
        if r.shape != self.base.lam.shape:
            raise InvalidInput("insertion weights are not aligned with the base spectrum")
        if np.any(np.abs(r) > self.norm * (1 + 1e-12)):
            raise InvalidInput("insertion exceeds norm times base weight")
        object.__setattr__(self, "ratio", r)

    @classmethod
    def identity(cls, base: SpectralMeasure) -> "ObservableInsertion":
        gen = None
        if base.generator is not None:
            gen = lambda R: cls.identity(base.extend(R))
        return cls(base, np.ones_like(base.lam), "1", 1.0, gen)

    def extend(self, R: float) -> "ObservableInsertion":
        if R <= self.base.cutoff:
            return self
        if self.generator is None:
            raise TruncationTooShort(
                f"insertion known up to {self.base.cutoff:g}, need {R:g}"
            )
        return self.generator(R)

    def positive_part(self) -> "ObservableInsertion":
        keep = self.base.lam >= 0
        gen = None
        if self.generator is not None:
            gen = lambda R, g=self.generator: g(R).positive_part()
        return ObservableInsertion(
            self.base.positive_part(), self.ratio[keep], self.label, self.norm, gen
        )


@dataclass(frozen=True)
class HeatTrace:
    value: float
    tail_bound: float
    cutoff: float

    def __iter__(self):
        yield self.value
        yield self.tail_bound


def _pick_cutoff(spec: SpectralMeasure, t: float, eps: Optional[float]) -> SpectralMeasure:
    if math.isinf(spec.cutoff):
        return spec
    if spec.growth is None:
        raise MissingGrowthBound("truncated spectrum without a growth certificate")
    if t <= spec.growth.b:
        raise DivergentSeries(f"t={t:g} does not exceed the growth rate b={spec.growth.b:g}")
    if eps is None:
        return spec
    R = spec.growth.cutoff_for(t, eps)
    if R > spec.cutoff and spec.generator is None:
        return spec  # caller sees the actual (larger) tail bound
    return spec.extend(R)


def _terms(spec: SpectralMeasure, t: float) -> np.ndarray:
    with np.errstate(under="ignore"):
        return np.exp(spec.logw - t * np.abs(spec.lam))


def heat_trace(
    spec: Union[SpectralMeasure, ObservableInsertion],
    t: float,
    eps: Optional[float] = 1e-12,
    positive_only: bool = False,
) -> HeatTrace:
    """Evaluate ``sum weight * ratio * exp(-t |lambda|)`` with a certified tail.

    Parameters
    ----------
    spec : SpectralMeasure or ObservableInsertion
    t : float
        Must exceed the growth rate ``b`` when the spectrum is truncated.
    eps : float or None
        Target tail bound.  The spectrum is extended through its generator
        as needed; without a generator the bound at the stored cutoff is
        returned and :class:`TruncationTooShort` is raised if it exceeds eps.
    positive_only : bool
        Restrict to ``lambda >= 0`` (the ``P_D`` compression).

    Returns
    -------
    HeatTrace
        ``(value, tail_bound)`` with ``|value - exact| <= tail_bound``.
    """
    if positive_only:
        spec = spec.positive_part()
    if isinstance(spec, ObservableInsertion):
        base = _pick_cutoff(spec.base, t, eps)
        ins = spec.extend(base.cutoff) if base is not spec.base else spec
        base = ins.base
        value = float(np.dot(ins.ratio, _terms(base, t)))
        scale = ins.norm
    else:
        base = _pick_cutoff(spec, t, eps)
        value = float(_terms(base, t).sum())
        scale = 1.0
    if math.isinf(base.cutoff):
        tail = 0.0
    else:
        tail = scale * base.growth.tail(t, base.cutoff)
    if eps is not None and tail > eps * (1 + 1e-9):
        raise TruncationTooShort(
            f"tail bound {tail:.3g} exceeds {eps:.3g} at cutoff {base.cutoff:g}"
        )
    return HeatTrace(value, tail, base.cutoff)


@dataclass(frozen=True)
class GibbsValue:
    value: float
    rel_error: float

    def __float__(self):
        return self.value


def gibbs_functional(
    numer: ObservableInsertion,
    denom: SpectralMeasure,
    t: float,
    eps: float = 1e-13,
    positive_only: bool = False,
) -> GibbsValue:
    """Ratio ``T(P B e^{-tD}) / T(P e^{-tD})`` with a relative error certificate.

    When the insertion is a constant multiple ``c`` of the base weights the
    ratio is exactly ``c`` and is returned without summation.
    """
    r = numer.ratio[numer.base.lam >= 0] if positive_only else numer.ratio
    if r.size and np.all(r == r[0]) and numer.generator is None and denom is numer.base:
        num_total = heat_trace(denom, t, eps, positive_only)
        if num_total.value <= 0:
            raise ZeroDenominator("heat trace of the denominator vanishes")
        return GibbsValue(float(r[0]), 0.0)
    num = heat_trace(numer, t, eps, positive_only)
    den = heat_trace(denom, t, eps, positive_only)
    if den.value <= den.tail_bound or den.value == 0.0:
        raise ZeroDenominator("denominator heat trace is zero within its tail bound")
    value = num.value / den.value
    err = (num.tail_bound + abs(value) * den.tail_bound) / (den.value - den.tail_bound)
    rel = err / abs(value) if value != 0 else err
    return GibbsValue(value, rel)


@dataclass(frozen=True)
class CriticalBeta:
    beta: float
    diverges_at_beta: bool
    log_exponent: float
    beta_stderr: float

    def __iter__(self):
        yield self.beta
        yield self.diverges_at_beta


def level_sums(spec: SpectralMeasure) -> tuple[np.ndarray, np.ndarray]:
    """Log of the weight in each unit bin ``[n, n+1)`` of the nonnegative spectrum."""
    keep = spec.lam >= 0
    lam, logw = spec.lam[keep], spec.logw[keep]
    bins = np.floor(lam).astype(np.int64)
    nmax = int(bins.max()) if bins.size else -1
    if math.isfinite(spec.cutoff):
        nmax = min(nmax, int(math.floor(spec.cutoff)) - 1)
    out = np.full(nmax + 1, -np.inf)
    for n in range(nmax + 1):
        sel = logw[bins == n]
        if sel.size:
            out[n] = np.logaddexp.reduce(sel)
    return np.arange(nmax + 1), out


def critical_beta(
    spec: SpectralMeasure,
    search_window: tuple[float, float] = (-1.0, 50.0),
    tol: float = 1e-3,
    levels: int = 400,
    divergence_margin: float = 0.1,
) -> CriticalBeta:
    """Estimate ``beta_D = inf{t : sum weight e^{-t lambda} < inf}`` on ``lambda >= 0``.

    The level sums ``w_n`` are regressed on ``beta n + a log n + c`` over
    the upper half of the available levels.  The series diverges at
    ``t = beta`` exactly when ``a >= -1``; ``divergence_margin`` absorbs
    regression noise around that threshold.
    """
    if spec.growth is None and math.isfinite(spec.cutoff):
        raise MissingGrowthBound("critical_beta needs a growth certificate")
    if math.isfinite(spec.cutoff) and spec.cutoff < levels and spec.generator is not None:
        spec = spec.extend(levels)
    n, lw = level_sums(spec)
    good = np.isfinite(lw) & (n >= 1)
    n, lw = n[good], lw[good]
    if n.size < 8:
        raise WindowTooNarrow("too few nonzero levels to estimate a growth rate")
    half = n >= n[n.size // 2]
    x, y = n[half].astype(float), lw[half]
    X = np.column_stack([x, np.log(x), np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    dof = max(1, x.size - 3)
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.pinv(X.T @ X)
    beta, a = float(coef[0]), float(coef[1])
    if abs(beta) < 1e-10:
        beta = 0.0
    lo, hi = search_window
    if not (lo - tol < beta < hi + tol):
        raise WindowTooNarrow(f"estimated beta={beta:.6g} outside ({lo}, {hi})")
    return CriticalBeta(beta, a >= -1.0 - divergence_margin, a, math.sqrt(max(cov[0, 0], 0.0)))


def level_measure(
    counts: Sequence[int],
    K: Optional[float] = None,
    rate: Optional[float] = None,
    slack: float = 0.0,
    generator: Optional[LevelGenerator] = None,
) -> SpectralMeasure:
    """Spectral measure with eigenvalue ``n`` of weight ``counts[n]`` (integers allowed to be huge)."""
    logw = np.array([math.log(c) if c > 0 else -math.inf for c in counts])
    growth = None
    if K is not None and rate is not None:
        growth = GrowthBound.from_levels(K, rate, slack)
    # levels 0..len-1 are complete, so the cutoff is just below the next level
    cutoff = len(counts) - 1 + 0.5
    return SpectralMeasure(np.arange(len(counts), dtype=float), logw, cutoff, growth, generator)


class SingularValueFunction:
    """Right-continuous nonincreasing step function ``t -> mu(t, T)``.

    ``mu(t) = values[k]`` for ``breaks[k] <= t < breaks[k+1]`` with
    ``breaks[0] = 0``; beyond the last break the function vanishes.
    """

    def __init__(self, breaks: np.ndarray, values: np.ndarray):
        breaks = np.asarray(breaks, dtype=float)
        values = np.asarray(values, dtype=float)
        if breaks.shape != (values.size + 1,):
            raise InvalidInput("need one more breakpoint than values")
        if np.any(np.diff(values) > 0) or np.any(values < 0):
            raise InvalidInput("singular value function must be nonnegative and nonincreasing")
        if breaks[0] != 0 or np.any(np.diff(breaks) <= 0):
            raise InvalidInput("breakpoints must start at 0 and increase strictly")
        self.breaks = breaks
        self.values = values
        self._cum = np.concatenate([[0.0], np.cumsum(values * np.diff(breaks))])

    @property
    def support(self) -> float:
        return float(self.breaks[-1])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        k = np.searchsorted(self.breaks, t, side="right") - 1
        out = np.where(k < self.values.size, self.values[np.clip(k, 0, self.values.size - 1)], 0.0)
        return out if out.ndim else float(out)

    def integral(self, t):
        """``int_0^t mu(s) ds`` computed exactly from the steps."""
        t = np.asarray(t, dtype=float)
        tc = np.minimum(t, self.breaks[-1])
        k = np.clip(np.searchsorted(self.breaks, tc, side="right") - 1, 0, self.values.size - 1)
        out = self._cum[k] + self.values[k] * (tc - self.breaks[k])
        return out if out.ndim else float(out)

    def distribution(self, s):
        """``n(s) = T(E_{|T|}(s, inf))``: total weight of values strictly above ``s``."""
        s = np.asarray(s, dtype=float)
        # values are sorted decreasingly; count those > s
        idx = np.searchsorted(-self.values, -s, side="left")
        out = self.breaks[idx]
        return out if out.ndim else float(out)

    def __repr__(self):
        return f"SingularValueFunction(steps={self.values.size}, support={self.support:g})"


def singular_value_function(values, weights=None) -> SingularValueFunction:
    """Decreasing rearrangement of a finite weighted multiset.

    Examples
    --------
    >>> mu = singular_value_function([3, 1, 2])
    >>> [mu(s) for s in (0, 1.5, 2.5, 3)]
    [3.0, 2.0, 1.0, 0.0]
    """
    v = np.abs(np.asarray(values, dtype=float).ravel())
    w = np.ones_like(v) if weights is None else np.asarray(weights, dtype=float).ravel()
    if w.shape != v.shape:
        raise InvalidInput("values and weights differ in length")
    if np.any(w < 0):
        raise NegativeWeight("multiplicity weights must be nonnegative")
    keep = w > 0
    v, w = v[keep], w[keep]
    if v.size == 0:
        raise InvalidInput("empty multiset")
    order = np.argsort(-v, kind="stable")
    v, w = v[order], w[order]
    # merge equal values so breakpoints increase strictly
    uniq, start = np.unique(-v, return_index=True)
    vals = -uniq
    wsum = np.add.reduceat(w, start)
    breaks = np.concatenate([[0.0], np.cumsum(wsum)])
    return SingularValueFunction(breaks, vals)
