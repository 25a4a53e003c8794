"""Free groups, word-length heat traces and the boundary Patterson-Sullivan measure.

Generators of ``F_k`` are the letters ``a, b, c, ...``; their inverses
are the upper-case letters.  A cylinder ``C_w`` is the set of infinite
reduced words starting with ``w``.  Everything is exact except where a
value is deliberately routed through the extrapolation pipeline.
"""

from __future__ import annotations

import itertools
import math
import string
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .asymptotics import LimitReport, LimitSchedule, extended_limit
from .errors import DepthInsufficient, InvalidInput, ShallowCylinder
from .spectral import (
    GrowthBound,
    ObservableInsertion,
    SpectralMeasure,
    critical_beta,
    gibbs_functional,
    level_measure,
)


class FreeGroup:
    """Reduced-word arithmetic in the free group of rank ``k``."""

    def __init__(self, rank: int):
        if rank < 2:
            raise InvalidInput("rank must be at least 2 (rank 1 has zero exponential growth)")
        if rank > 26:
            raise InvalidInput("rank above 26 is not supported by the letter alphabet")
        self.rank = rank
        self.generators = tuple(string.ascii_lowercase[:rank])
        self.letters = self.generators + tuple(c.upper() for c in self.generators)

    @staticmethod
    def inv_letter(c: str) -> str:
        return c.lower() if c.isupper() else c.upper()

    def check(self, w: str) -> str:
        bad = set(w) - set(self.letters)
        if bad:
            raise InvalidInput(f"letters {sorted(bad)} are not generators of F_{self.rank}")
        return w

    def is_reduced(self, w: str) -> bool:
        return all(self.inv_letter(x) != y for x, y in zip(w, w[1:]))

    def reduce(self, w: str) -> str:
        out: list[str] = []
        for c in self.check(w):
            if out and out[-1] == self.inv_letter(c):
                out.pop()
            else:
                out.append(c)
        return "".join(out)

    def inverse(self, w: str) -> str:
        return "".join(self.inv_letter(c) for c in reversed(self.check(w)))

    def multiply(self, g: str, h: str) -> str:
        return self.reduce(g + h)

    def cancellation(self, g: str, w: str) -> int:
        """Number of letters of ``w`` consumed when reducing ``g w`` (both reduced)."""
        c = 0
        while c < min(len(g), len(w)) and g[len(g) - 1 - c] == self.inv_letter(w[c]):
            c += 1
        return c

    def words(self, n: int) -> list[str]:
        """All reduced words of length ``n``."""
        out = [""]
        for _ in range(n):
            out = [w + c for w in out for c in self.letters if not w or self.inv_letter(w[-1]) != c]
        return out

    @property
    def branching(self) -> int:
        return 2 * self.rank - 1


def sphere_counts(ctx: FreeGroup, n_max: int) -> list[int]:
    """``#{|g| = n}`` for ``n <= n_max``: 1, 2k, 2k(2k-1), ..."""
    if n_max < 0:
        raise InvalidInput("n_max must be nonnegative")
    q = ctx.branching
    return [1] + [2 * ctx.rank * q ** (n - 1) for n in range(1, n_max + 1)]


def length_spectrum(ctx: FreeGroup, R: float = 64) -> SpectralMeasure:
    """Eigenvalue ``n`` with multiplicity ``#{|g| = n}`` and its growth certificate."""
    L = max(8, int(math.floor(R)) + 1)
    q = ctx.branching
    n = np.arange(L + 1, dtype=float)
    logw = np.where(n == 0, 0.0, math.log(2 * ctx.rank) + (n - 1) * math.log(q))
    growth = GrowthBound.from_levels(2 * ctx.rank / q, math.log(q))
    return SpectralMeasure(n, logw, L + 0.5, growth, lambda R2: length_spectrum(ctx, R2))


@dataclass(frozen=True)
class PoincareCritical:
    beta: float
    is_critical: bool
    exact: float

    def __iter__(self):
        yield self.beta
        yield self.is_critical


def poincare_critical(ctx: FreeGroup, levels: int = 400) -> PoincareCritical:
    """Critical exponent of ``sum_g e^{-t|g|}`` estimated from the sphere growth."""
    cb = critical_beta(length_spectrum(ctx, levels), search_window=(0.0, 20.0), levels=levels)
    return PoincareCritical(cb.beta, cb.diverges_at_beta, math.log(ctx.branching))


def cylinder_insertion(ctx: FreeGroup, w: str, R: float = 64) -> ObservableInsertion:
    """Indicator of ``{g : g starts with w}`` against the length spectrum."""
    w = ctx.check(w)
    if not w or not ctx.is_reduced(w):
        raise InvalidInput("cylinder base must be a nonempty reduced word")
    base = length_spectrum(ctx, R)
    m = len(w)
    q = ctx.branching
    n = base.lam.astype(int)
    # q^{n-m} of the 2k q^{n-1} words of length n >= m start with w
    ratio = np.where(n >= m, float(q) ** (1 - m) / (2 * ctx.rank), 0.0)
    return ObservableInsertion(base, ratio, f"1[C_{w}]", 1.0,
                               lambda R2: cylinder_insertion(ctx, w, R2))


def exact_cylinder_measure(ctx: FreeGroup, w: str) -> Fraction:
    """``mu(C_w) = (1/2k) (2k-1)^{-(|w|-1)}``."""
    w = ctx.check(w)
    if not w:
        return Fraction(1)
    return Fraction(1, 2 * ctx.rank) / Fraction(ctx.branching) ** (len(w) - 1)


def ps_cylinder_measure(
    ctx: FreeGroup, w: str, schedule: Optional[LimitSchedule] = None
) -> LimitReport:
    """Extended limit of the normalised Poincare-series mass of the cylinder ``C_w``."""
    beta = math.log(ctx.branching)
    schedule = schedule or LimitSchedule.geometric(beta, first=0.4, n=8, policy="richardson")
    ins = cylinder_insertion(ctx, w)
    f = lambda t: gibbs_functional(ins, ins.base, t, 1e-13).value
    return extended_limit(f, schedule, rtol=1e-8, atol=1e-10)


def rn_cocycle(ctx: FreeGroup, g: str, w: str, exact: bool = False):
    """``mu(g C_w) / mu(C_w)`` for a cylinder deeper than the cancellation of ``g``.

    Equals ``(2k-1)^{-(|gw| - |w|)}``.
    """
    g, w = ctx.reduce(g), ctx.check(w)
    if not ctx.is_reduced(w) or not w:
        raise InvalidInput("cylinder base must be a nonempty reduced word")
    c = ctx.cancellation(g, w)
    if c >= len(w):
        raise ShallowCylinder(f"cylinder {w!r} is not deeper than the cancellation ({c}) of {g!r}")
    gw = ctx.multiply(g, w)
    val = Fraction(ctx.branching) ** (len(w) - len(gw))
    return val if exact else float(val)


def partition_sums(ctx: FreeGroup, depth: int) -> list[Fraction]:
    """Exact total measure of the level-m cylinder partition for ``m <= depth``."""
    return [sum((exact_cylinder_measure(ctx, w) for w in ctx.words(m)), Fraction(0))
            for m in range(1, depth + 1)]


@dataclass(frozen=True)
class CylinderFunction:
    """Function on the boundary, constant on cylinders of a fixed depth."""

    depth: int
    values: Mapping[str, float]

    @classmethod
    def constant(cls, c: float) -> "CylinderFunction":
        return cls(0, {"": float(c)})

    @classmethod
    def indicator(cls, ctx: FreeGroup, w: str) -> "CylinderFunction":
        return cls(len(w), {u: 1.0 if u == w else 0.0 for u in ctx.words(len(w))})

    def __call__(self, u: str) -> float:
        if len(u) < self.depth:
            raise DepthInsufficient(f"cell {u!r} is coarser than the function depth {self.depth}")
        return self.values.get(u[: self.depth], 0.0)


Element = tuple  # (CylinderFunction, reduced word)


class CrossedProductState:
    """``phi(f lambda_g) = delta_{g,e} int f dmu`` on cylinder-function coefficients."""

    def __init__(self, ctx: FreeGroup, depth: int):
        self.ctx = ctx
        self.depth = depth
        self.cells = ctx.words(depth)
        self.mass = {u: float(exact_cylinder_measure(ctx, u)) for u in self.cells}

    def radon_nikodym(self, g: str, u: str) -> float:
        """``d(g_* mu)/d mu`` on the cell ``C_u``, i.e. ``mu(g^{-1} C_u) / mu(C_u)``."""
        try:
            return rn_cocycle(self.ctx, self.ctx.inverse(g), u)
        except ShallowCylinder as exc:
            raise DepthInsufficient(str(exc)) from None

    def translate(self, g: str, u: str) -> str:
        """Cell ``g^{-1} C_u`` as a (longer or shorter) cylinder word."""
        gi = self.ctx.inverse(g)
        if self.ctx.cancellation(gi, u) >= len(u):
            raise DepthInsufficient(f"translation by {g!r} cancels the whole cell {u!r}")
        return self.ctx.multiply(gi, u)

    def value_of_product(self, x: Element, y: Element, exponent: Optional[float] = None) -> float:
        """``phi(x y)``; with ``exponent`` p, ``phi(y sigma_i(x))`` where
        ``sigma_i(f lambda_g) = D_g^{-p} f lambda_g``."""
        ctx = self.ctx
        (f, g), (h, gp) = x, y
        if exponent is None:
            if ctx.multiply(g, gp) != "":
                return 0.0
            # f . (g.h): (g.h)(xi) = h(g^{-1} xi)
            return sum(f(u) * h(self.translate(g, u)) * self.mass[u] for u in self.cells)
        if ctx.multiply(gp, g) != "":
            return 0.0
        total = 0.0
        for u in self.cells:
            v = self.translate(gp, u)  # gp^{-1} u = g u
            D = self.radon_nikodym(g, v)
            total += h(u) * D ** (-exponent) * f(v) * self.mass[u]
        return total


def crossed_product_kms_check(
    ctx: FreeGroup,
    elements: Sequence[Element],
    depth: int,
    exponent: float = 1.0,
) -> float:
    """Largest ``|phi(xy) - phi(y sigma_i(x))|`` over ordered pairs of elements.

    ``exponent = 1`` is the Radon-Nikodym flow at inverse temperature one;
    other exponents serve as negative controls.
    """
    state = CrossedProductState(ctx, depth)
    worst = 0.0
    for x in elements:
        for y in elements:
            lhs = state.value_of_product(x, y)
            rhs = state.value_of_product(x, y, exponent)
            worst = max(worst, abs(lhs - rhs))
    return worst


def standard_elements(ctx: FreeGroup, coeff_depth: int = 2, seed: int = 0) -> list[Element]:
    """Test set: group elements of length <= 2 with random and constant depth-limited coefficients."""
    rng = np.random.default_rng(seed)
    group = [""] + ctx.words(1) + ctx.words(2)
    out = []
    cells = ctx.words(coeff_depth)
    for g in group:
        out.append((CylinderFunction.constant(1.0), g))
        vals = {u: float(v) for u, v in zip(cells, rng.uniform(0, 1, len(cells)))}
        out.append((CylinderFunction(coeff_depth, vals), g))
    return out
