"""Coordinate maps between the sphere S^n, the box P_xi and the flat torus on S^{2n-1}.

All functions operate on the last axis and broadcast over any leading axes,
so a batch of points is just an array of shape ``(..., dim)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainExceeded, NotOnTorus, ZeroPair

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class FoliationProfile:
    """Unit vector ``xi`` with positive entries selecting one flat torus.

    The torus is the product of circles of radii ``xi_i``; its pre-image box is
    ``P_xi = prod [0, 2 pi xi_i)``.
    """

    xi: np.ndarray

    def __post_init__(self):
        xi = np.array(self.xi, dtype=float).reshape(-1)
        if xi.size < 1:
            raise ValueError("xi must have at least one component")
        if np.any(xi <= 0):
            raise ValueError("every xi_i must be strictly positive")
        if abs(np.linalg.norm(xi) - 1.0) > 1e-12:
            raise ValueError(f"xi must have unit norm, got {np.linalg.norm(xi)!r}")
        xi.setflags(write=False)
        object.__setattr__(self, "xi", xi)

    @classmethod
    def uniform(cls, n: int) -> "FoliationProfile":
        """The profile ``[1, ..., 1] / sqrt(n)`` maximizing ``xi_min``."""
        return cls(np.full(n, 1.0 / np.sqrt(n)))

    @classmethod
    def normalized(cls, values) -> "FoliationProfile":
        v = np.asarray(values, dtype=float)
        return cls(v / np.linalg.norm(v))

    @property
    def n(self) -> int:
        return self.xi.size

    @property
    def xi_min(self) -> float:
        return float(self.xi.min())

    @property
    def box(self) -> np.ndarray:
        """Side lengths ``2 pi xi_i`` of the pre-image box."""
        return TWO_PI * self.xi


def _profile(xi) -> FoliationProfile:
    return xi if isinstance(xi, FoliationProfile) else FoliationProfile(xi)


def spherical_angles(x, xi, return_degenerate: bool = False):
    """Map a point of S^n to the box, ``gamma_xi(x) = [xi_1 phi_1, ..., xi_n phi_n]``.

    ``phi_1..phi_{n-1}`` lie in ``[0, pi]`` and ``phi_n`` in ``[0, 2 pi)``.
    When a trailing block of ``x`` is zero the later angles are undefined;
    they are set to 0 and, if requested, a boolean flag is returned.
    """
    prof = _profile(xi)
    x = np.asarray(x, dtype=float)
    n = prof.n
    if x.shape[-1] != n + 1:
        raise ValueError(f"expected points of dimension {n + 1}, got {x.shape[-1]}")
    # tail[..., i] = ||x[i:]||
    tail = np.sqrt(np.cumsum((x**2)[..., ::-1], axis=-1)[..., ::-1])
    phi = np.empty(x.shape[:-1] + (n,))
    # atan2 gives phi_i = 0 automatically once the remaining tail vanishes
    phi[..., : n - 1] = np.arctan2(tail[..., 1:n], x[..., : n - 1])
    last = np.arctan2(x[..., n], x[..., n - 1])
    last = np.where(last < 0.0, last + TWO_PI, last)
    last = np.where(last >= TWO_PI, 0.0, last)
    phi[..., n - 1] = last
    u = phi * prof.xi
    if return_degenerate:
        return u, tail[..., n - 1] == 0.0
    return u


def inverse_spherical_angles(u, xi, check: bool = True) -> np.ndarray:
    """Inverse of :func:`spherical_angles`: box point to a unit vector on S^n."""
    prof = _profile(xi)
    u = np.asarray(u, dtype=float)
    if check and (np.any(u >= prof.box) or np.any(u < 0.0)):
        raise DomainExceeded("box coordinate outside [0, 2*pi*xi_i)")
    phi = u / prof.xi
    n = prof.n
    s = np.sin(phi)
    c = np.cos(phi)
    out = np.empty(u.shape[:-1] + (n + 1,))
    sin_prod = np.ones(u.shape[:-1])
    for i in range(n):
        out[..., i] = sin_prod * c[..., i]
        sin_prod = sin_prod * s[..., i]
    out[..., n] = sin_prod
    return out


def torus_map(u, xi) -> np.ndarray:
    """``Phi_xi(u)``: interleaved ``xi_i cos(u_i/xi_i), xi_i sin(u_i/xi_i)``."""
    prof = _profile(xi)
    u = np.asarray(u, dtype=float)
    ang = u / prof.xi
    out = np.empty(u.shape[:-1] + (2 * prof.n,))
    out[..., 0::2] = prof.xi * np.cos(ang)
    out[..., 1::2] = prof.xi * np.sin(ang)
    return out


def pair_norms(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return np.hypot(p[..., 0::2], p[..., 1::2])


def torus_unmap(p, xi, tol: float = 1e-6) -> np.ndarray:
    """Inverse of :func:`torus_map` on its image, wrapped into ``[0, 2 pi xi_i)``."""
    prof = _profile(xi)
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != 2 * prof.n:
        raise ValueError(f"expected dimension {2 * prof.n}, got {p.shape[-1]}")
    if np.any(np.abs(pair_norms(p) - prof.xi) > tol * prof.xi):
        raise NotOnTorus("coordinate pair norm differs from xi_i")
    return _pair_angles(p) * prof.xi


def _pair_angles(p) -> np.ndarray:
    ang = np.arctan2(p[..., 1::2], p[..., 0::2])
    ang = np.where(ang < 0.0, ang + TWO_PI, ang)
    return np.where(ang >= TWO_PI, 0.0, ang)


def torus_project(qhat, xi, on_zero: str = "raise") -> np.ndarray:
    """Project each coordinate pair of ``qhat`` onto its circle of radius ``xi_i``.

    A pair with norm below 1e-30 has no direction. With ``on_zero="raise"``
    this raises :class:`ZeroPair`; with ``on_zero="zero_angle"`` the pair is
    replaced by ``(xi_i, 0)``.
    """
    prof = _profile(xi)
    q = np.array(qhat, dtype=float)
    if q.shape[-1] != 2 * prof.n:
        raise ValueError(f"expected dimension {2 * prof.n}, got {q.shape[-1]}")
    a, b = q[..., 0::2], q[..., 1::2]
    r = np.hypot(a, b)
    zero = r < 1e-30
    if np.any(zero):
        if on_zero == "raise":
            raise ZeroPair("cannot project a zero coordinate pair")
        a = np.where(zero, 1.0, a)
        b = np.where(zero, 0.0, b)
        r = np.where(zero, 1.0, r)
    q[..., 0::2] = prof.xi * a / r
    q[..., 1::2] = prof.xi * b / r
    return q


def circular_difference(u, v, xi) -> np.ndarray:
    """``u - v`` with each coordinate wrapped into ``[-pi xi_i, pi xi_i)``."""
    prof = _profile(xi)
    box = prof.box
    d = np.asarray(u, dtype=float) - np.asarray(v, dtype=float)
    return (d + box / 2) % box - box / 2


def reflect_into_half_box(chi, xi, count: int | None = None) -> np.ndarray:
    """Fold coordinates ``chi_i >= pi xi_i`` to ``2 pi xi_i - chi_i``.

    Only the first ``count`` coordinates are folded (all when ``None``).
    """
    prof = _profile(xi)
    chi = np.array(chi, dtype=float)
    k = prof.n if count is None else count
    half = np.pi * prof.xi[:k]
    head = chi[..., :k]
    chi[..., :k] = np.where(head >= half, TWO_PI * prof.xi[:k] - head, head)
    return chi
