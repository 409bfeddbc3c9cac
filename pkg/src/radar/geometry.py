"""l_p geometry used by the annealed dual-averaging methods.

The prox function is ``||theta - c||_p^2 / (2 (p - 1) R^2)`` with
``p = 2 ln d / (2 ln d - 1)``, which is strongly convex with respect to the
l1 norm. All routines here are pure functions on 1-d numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class InvalidDimensionError(ValueError):
    pass


class ShapeError(ValueError):
    pass


def conjugate_exponents(d: int) -> tuple[float, float]:
    """Return ``(p, q)`` for dimension ``d``, natural log throughout."""
    if int(d) != d or d < 3:
        raise InvalidDimensionError(f"dimension must be an integer >= 3, got {d!r}")
    two_log_d = 2.0 * math.log(d)
    return two_log_d / (two_log_d - 1.0), two_log_d


@dataclass(frozen=True)
class LpGeometry:
    """Exponent pair and prox constant for a ``d``-dimensional problem.

    Use :meth:`from_dimension` for the standard choice of ``p``. Passing ``p``
    directly is meant for verification (e.g. ``p = 2`` for Euclidean checks).
    """

    d: int
    p: float
    q: float
    a_prox: float

    @classmethod
    def from_dimension(cls, d: int) -> "LpGeometry":
        p, q = conjugate_exponents(d)
        return cls(d=int(d), p=p, q=q, a_prox=math.e * math.log(d))

    @classmethod
    def with_exponent(cls, d: int, p: float) -> "LpGeometry":
        if not 1.0 < p <= 2.0:
            raise ValueError(f"p must lie in (1, 2], got {p}")
        if d < 1:
            raise InvalidDimensionError(f"dimension must be positive, got {d}")
        return cls(d=int(d), p=float(p), q=p / (p - 1.0), a_prox=math.e * math.log(max(d, 3)))


def _as_vector(x, d: int | None = None, name: str = "vector") -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ShapeError(f"{name} must be 1-d, got shape {x.shape}")
    if d is not None and x.shape[0] != d:
        raise ShapeError(f"{name} has length {x.shape[0]}, expected {d}")
    return x


def lp_norm(x: np.ndarray, p: float) -> float:
    """``||x||_p`` computed on the max-normalised vector to avoid overflow."""
    x = np.abs(np.asarray(x, dtype=float))
    m = x.max(initial=0.0)
    if m == 0.0:
        return 0.0
    return float(m * np.sum((x / m) ** p) ** (1.0 / p))


def prox_value(theta, center, radius: float, geom: LpGeometry) -> float:
    if radius <= 0:
        raise ValueError("radius must be positive")
    theta = _as_vector(theta, geom.d, "theta")
    center = _as_vector(center, geom.d, "center")
    dist = lp_norm(theta - center, geom.p)
    return dist * dist / (2.0 * (geom.p - 1.0) * radius * radius)


def dual_averaging_step(mu, center, radius: float, eta: float, geom: LpGeometry) -> np.ndarray:
    """Minimise ``eta <mu, theta> + psi(theta)`` over ``||theta - center||_p <= radius``.

    Closed form: the unconstrained minimiser moves against ``mu`` along the
    Hoelder-dual direction ``|mu|^(q-1) sign(mu) ||mu||_q^(2-q)``; the ball
    constraint rescales it by ``1 / (1 + xi)`` with
    ``xi = max(0, (p - 1) eta ||mu||_q radius - 1)``. Cost is O(d).
    """
    if radius <= 0 or eta <= 0:
        raise ValueError("radius and eta must be positive")
    mu = _as_vector(mu, geom.d, "mu")
    center = _as_vector(center, geom.d, "center")
    m = np.abs(mu).max(initial=0.0)
    if m == 0.0:
        return center.copy()
    p, q = geom.p, geom.q
    u = mu / m
    au = np.abs(u)
    powered = au ** (q - 1.0)
    norm_u = float(np.dot(powered, au) ** (1.0 / q))
    norm_mu = m * norm_u
    xi = max(0.0, (p - 1.0) * eta * norm_mu * radius - 1.0)
    # |mu|^(q-1) ||mu||_q^(2-q) == m * |u|^(q-1) ||u||_q^(2-q)
    direction = np.sign(u) * powered * (m * norm_u ** (2.0 - q))
    return center - ((p - 1.0) * radius * radius * eta / (1.0 + xi)) * direction


def l1_subgradient(theta) -> np.ndarray:
    """Sign vector of ``theta`` with 0 on zero entries."""
    return np.sign(np.asarray(theta, dtype=float))


def project_l1_ball(theta, radius: float) -> np.ndarray:
    """Euclidean projection onto ``{x : ||x||_1 <= radius}`` (sort-based)."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    theta = _as_vector(theta, name="theta")
    a = np.abs(theta)
    # slack keeps projection idempotent under rounding of the shifted sum
    if a.sum() <= radius * (1.0 + 1e-12):
        return theta.copy()
    srt = np.sort(a)[::-1]
    css = np.cumsum(srt) - radius
    ks = np.arange(1, a.size + 1)
    rho = np.nonzero(srt - css / ks > 0)[0][-1]
    shift = css[rho] / (rho + 1.0)
    # css cancels badly when entries dwarf the radius; one Newton step on the active set repairs it
    x = np.maximum(a - shift, 0.0)
    active = x > 0
    if active.any():
        shift += (x.sum() - radius) / active.sum()
        x = np.maximum(a - shift, 0.0)
    return np.sign(theta) * x
