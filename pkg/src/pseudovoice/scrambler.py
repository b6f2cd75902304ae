"""Distortion-tolerant scrambling of unit vectors through a spherical group code.

``scramble`` quantizes the spherical angles of ``x`` to the fine lattice,
translates the coset by the secret ``nu`` and maps it onto the flat torus.
``descramble`` projects a noisy received vector back onto the torus and
undoes the translation. Small channel errors stay small: see
:func:`distortion_bound`.
"""

from __future__ import annotations

import numpy as np

from .lattice_codes import SphericalGroupCode, cvp
from .sphere_maps import (
    _pair_angles,
    inverse_spherical_angles,
    reflect_into_half_box,
    spherical_angles,
    torus_map,
    torus_project,
)


def quantize(x, code: SphericalGroupCode) -> np.ndarray:
    """Closest fine-lattice point to ``gamma(x)``, reduced into the box."""
    q = code.quotient
    u = spherical_angles(x, code.xi)
    return q.reduce(cvp(u, q.fine))


def coset_of(code: SphericalGroupCode, w) -> np.ndarray:
    """Box-coordinate coset vector for the group index ``w``."""
    return code.quotient.vector_of(w)


def scramble(x, code: SphericalGroupCode, nu_coset) -> np.ndarray:
    q = code.quotient
    chi = quantize(x, code)
    return torus_map(q.reduce(chi + np.asarray(nu_coset, dtype=float)), code.xi)


def descramble(qhat, code: SphericalGroupCode, nu_coset, fold_count: int | None = None) -> np.ndarray:
    """Recover a point of S^n from a received vector near the torus.

    Coordinates ``0..fold_count-1`` that land in the upper half of their
    range are reflected back (default: all but the last one).
    """
    q = code.quotient
    proj = torus_project(qhat, code.xi, on_zero="zero_angle")
    v = _pair_angles(proj) * code.xi.xi
    chi = q.reduce(v - np.asarray(nu_coset, dtype=float))
    k = code.xi.n - 1 if fold_count is None else fold_count
    chi = reflect_into_half_box(chi, code.xi, k)
    return inverse_spherical_angles(chi, code.xi, check=False)


def quantization_bound(code: SphericalGroupCode) -> float:
    """Worst-case ``||x - descramble(scramble(x))||`` without channel noise."""
    return code.quotient.fine.covering_radius / code.xi.xi_min


def distortion_bound(code: SphericalGroupCode, channel_distance: float) -> float:
    """Upper bound on ``||y - x||`` given ``||p - q||`` after projection.

    The inverse angle map is ``1/xi_min``-Lipschitz everywhere, the half-box
    fold cannot increase circular distances, and on each circle the arc is at
    most ``pi/2`` times the chord, so the bound holds for every draw.
    """
    return np.pi / (2.0 * code.xi.xi_min) * channel_distance + quantization_bound(code)
