"""Cubic elasticity algebra in 2D Voigt notation.

All moduli are in kN/mm^2. A 2D cubic tensor is described by the triple
``(mu, mu_star, lam)`` with Voigt matrix::

    [[2 mu + lam, lam,        0      ],
     [lam,        2 mu + lam, 0      ],
     [0,          0,          mu_star]]

acting on ``(eps11, eps22, 2 eps12)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ConstraintError(ValueError):
    """A parameter set violates an ordering or admissibility constraint."""


@dataclass(frozen=True)
class IsotropicLame:
    lam: float
    mu: float

    def __post_init__(self):
        if not (self.mu > 0 and self.lam + self.mu > 0):
            raise ValueError(f"Lame pair not positive definite: lam={self.lam}, mu={self.mu}")

    def as_cubic(self) -> "CubicModuli":
        return CubicModuli(self.mu, self.mu, self.lam)


@dataclass(frozen=True)
class CubicModuli:
    mu: float
    mu_star: float
    lam: float

    @property
    def bulk_like(self) -> float:
        """``lam + mu``, the combination entering the Reuss rule."""
        return self.lam + self.mu

    def is_positive_definite(self) -> bool:
        return self.mu > 0 and self.mu_star > 0 and self.lam + self.mu > 0

    def scaled(self, s: float) -> "CubicModuli":
        return CubicModuli(s * self.mu, s * self.mu_star, s * self.lam)

    def as_array(self) -> np.ndarray:
        return np.array([self.mu, self.mu_star, self.lam])


def voigt(c: CubicModuli) -> np.ndarray:
    """3x3 Voigt stiffness matrix of a cubic tensor."""
    d = 2.0 * c.mu + c.lam
    return np.array([[d, c.lam, 0.0], [c.lam, d, 0.0], [0.0, 0.0, c.mu_star]])


def _harmonic_gap(x: float, y: float) -> float:
    return x * y / (x - y)


def reuss_ce(micro: CubicModuli, macro: CubicModuli) -> CubicModuli:
    """Gap stiffness ``C_e`` from ``C_macro^-1 = C_micro^-1 + C_e^-1``.

    The cubic structure decouples the inversion into the three scalar
    channels ``mu``, ``mu_star`` and ``lam + mu``. ``lam_e`` may be negative;
    only cubic positive definiteness of the result is guaranteed.

    Raises
    ------
    ConstraintError
        If ``micro`` is not strictly stiffer than ``macro`` in every channel.
    """
    violated = []
    if not micro.mu > macro.mu:
        violated.append("mu")
    if not micro.mu_star > macro.mu_star:
        violated.append("mu_star")
    if not micro.bulk_like > macro.bulk_like:
        violated.append("lam+mu")
    if violated:
        raise ConstraintError(f"C_micro not stiffer than C_macro in {violated}")
    mu_e = _harmonic_gap(micro.mu, macro.mu)
    mu_star_e = _harmonic_gap(micro.mu_star, macro.mu_star)
    bulk_e = _harmonic_gap(micro.bulk_like, macro.bulk_like)
    return CubicModuli(mu_e, mu_star_e, bulk_e - mu_e)


def reuss_ce_derivatives(micro: CubicModuli, macro: CubicModuli) -> np.ndarray:
    """Jacobian of ``(mu_e, mu_star_e, lam_e)`` w.r.t. ``(mu, mu_star, lam)`` of micro.

    Used by the fixed-field (envelope) partials; ``d/dx [x y / (x - y)] = -y^2 / (x - y)^2``.
    """
    def dgap(x, y):
        return -(y * y) / (x - y) ** 2

    d_mu = dgap(micro.mu, macro.mu)
    d_star = dgap(micro.mu_star, macro.mu_star)
    d_bulk = dgap(micro.bulk_like, macro.bulk_like)
    # lam_e = bulk_e(lam + mu) - mu_e(mu)
    return np.array([
        [d_mu, 0.0, 0.0],
        [0.0, d_star, 0.0],
        [d_bulk - d_mu, 0.0, d_bulk],
    ])


def equivalent_shear(macro: CubicModuli) -> float:
    """Isotropic shear modulus closest to ``macro`` in the log-Euclidean sense.

    ``(mu^2 mu_star^3)^(1/5)``.
    """
    if not macro.is_positive_definite():
        raise ConstraintError("equivalent shear requires a positive definite tensor")
    return float((macro.mu ** 2 * macro.mu_star ** 3) ** 0.2)


def matrix_bound_violations(micro: CubicModuli, matrix: IsotropicLame) -> list[str]:
    """Which of the stiffest-response bounds ``micro`` breaks.

    The bounds are ``mu_star <= mu_m``, ``mu <= mu_m`` and
    ``mu + lam <= mu_m + lam_m``. Equality counts as satisfied. Returned names
    are drawn from ``{"mu_star", "mu", "lam+mu"}``.
    """
    out = []
    if micro.mu_star > matrix.mu:
        out.append("mu_star")
    if micro.mu > matrix.mu:
        out.append("mu")
    if micro.mu + micro.lam > matrix.mu + matrix.lam:
        out.append("lam+mu")
    return out
