"""Closed-form Haar-averaged asymptotics.

The square-root moment of the Marchenko-Pastur law with ratio ``lam <= 1``
is ``2F1(1/2, -1/2; 2; lam)``; its square is the large-dimension optimal
hacking fidelity. :func:`mp_moment_quadrature` integrates the density
directly and is used as an independent check of the series.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import integrate

SERIES_TOL = 1e-15
SERIES_MAX_TERMS = 200_000


def hyp2f1_series(a: float, b: float, c: float, z: float, tol: float = SERIES_TOL, max_terms: int = SERIES_MAX_TERMS) -> float:
    """Gauss series of ``2F1(a, b; c; z)`` for ``0 <= z <= 1``.

    At ``z = 1`` (with ``c - a - b > 0``) Gauss's summation theorem is used:
    the terms only decay like ``n^(a+b-c-1)`` there.
    """
    if not 0.0 <= z <= 1.0:
        raise ValueError(f"z must lie in [0, 1], got {z}")
    if z == 1.0:
        if c - a - b <= 0:
            raise ValueError("series diverges at z = 1 unless c - a - b > 0")
        return _gauss_at_one(a, b, c)
    total = 1.0
    term = 1.0
    for n in range(max_terms):
        term *= (a + n) * (b + n) / ((c + n) * (n + 1)) * z
        total += term
        if abs(term) < tol:
            break
    return total


def _gauss_at_one(a: float, b: float, c: float) -> float:
    # 1/Gamma vanishes at non-positive integers (terminating series)
    def rgamma(x):
        if x <= 0 and float(x).is_integer():
            return 0.0
        return 1.0 / math.gamma(x)

    return math.gamma(c) * math.gamma(c - a - b) * rgamma(c - a) * rgamma(c - b)


def hyp2f1_half(z: float) -> float:
    """``2F1(1/2, -1/2; 2; z)`` on ``[0, 1]``; equals ``8 / (3 pi)`` at ``z = 1``."""
    return hyp2f1_series(0.5, -0.5, 2.0, z)


def mp_moment(lam: float, m: float) -> float:
    """``E[x^m]`` under Marchenko-Pastur with ratio ``lam`` via ``2F1(1 - m, -m; 2; lam)``."""
    return hyp2f1_series(1.0 - m, -m, 2.0, lam)


def mp_moment_quadrature(lam: float, m: float, tol: float = 1e-10) -> float:
    """``E[x^m]`` by adaptive quadrature of the Marchenko-Pastur density.

    Integrates ``x^(m-1) sqrt((l+ - x)(x - l-)) / (2 pi lam)`` over
    ``[l-, l+]`` with ``l+- = (1 +- sqrt(lam))^2``. The square-root endpoint
    behaviour is handled by an algebraic weight.
    """
    if not 0.0 < lam <= 1.0:
        raise ValueError(f"lam must lie in (0, 1], got {lam}")
    lo = (1.0 - math.sqrt(lam)) ** 2
    hi = (1.0 + math.sqrt(lam)) ** 2
    opts = dict(epsabs=tol / 10, epsrel=1e-12, limit=200)
    if lo > 1e-14:
        val, err = integrate.quad(lambda x: x ** (m - 1.0), lo, hi, weight="alg", wvar=(0.5, 0.5), **opts)
    else:
        if m <= -0.5:
            raise ValueError("moment diverges at the hard edge for m <= -1/2")
        # x^(m-1) * sqrt(x) folds into the left endpoint weight
        val, err = integrate.quad(lambda x: 1.0, 0.0, hi, weight="alg", wvar=(m - 0.5, 0.5), **opts)
    if not math.isfinite(val) or err > tol:
        raise ArithmeticError(f"quadrature did not reach {tol:g} (estimate {err:.2g})")
    return val / (2.0 * math.pi * lam)


def i_kappa(kappa: float) -> float:
    """Square-root moment for aspect ratio ``kappa``; the argument is ``min(kappa^2, kappa^-2)``."""
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    k2 = kappa * kappa
    return hyp2f1_half(min(k2, 1.0 / k2))


def i_kappa_approx(kappa: float) -> float:
    return 1.0 - 1.0 / (8.0 * kappa * kappa)


@dataclass(frozen=True)
class DimensionProfile:
    da: int
    db: int
    dk: int | None = None
    dl: int | None = None
    d0: int = 1

    def __post_init__(self):
        if self.dk is None:
            object.__setattr__(self, "dk", self.da)
        if self.dl is None:
            object.__setattr__(self, "dl", self.db)
        if min(self.da, self.db, self.dk, self.dl, self.d0) < 1:
            raise ValueError("dimensions must be positive")
        if self.da * self.db != self.dk * self.dl:
            raise ValueError("dA dB must equal dK dL")

    @property
    def ratio(self) -> float:
        """Rows over columns of the rotated operator, ``dL dB / (dK dA)``."""
        return (self.dl * self.db) / (self.dk * self.da)

    @property
    def kappa(self) -> float:
        return math.sqrt(self.ratio)


def avg_p_opt(profile: DimensionProfile) -> float:
    """Haar-averaged optimal hacking fidelity in the large-dimension approximation.

    ``I^2 + (1 - I^2)/(dA dK)`` when ``dA dK <= dB dL``, otherwise the
    leading term carries the factor ``dB dL / (dA dK)``; the whole value is
    divided by ``d0^2``.
    """
    ik2 = i_kappa(profile.kappa) ** 2
    n = profile.da * profile.dk
    lead = ik2 if profile.ratio >= 1 else profile.ratio * ik2
    return (lead + (1.0 - ik2) / n) / profile.d0**2
