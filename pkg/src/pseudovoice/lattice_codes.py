"""Lattices, closest-vector decoders, Smith normal form and spherical group codes.

A pair of nested lattices ``coarse ⊂ fine`` with an orthogonal coarse basis
defines a finite abelian quotient ``fine/coarse``. Mapping its coset
representatives through the torus map gives a spherical commutative group
code whose generators are block-diagonal rotations.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import IndexOutOfRange, NotNested, NotOrthogonal, SingularMatrix
from .sphere_maps import FoliationProfile, torus_map

TWO_PI = 2.0 * np.pi


class LatticeKind(enum.Enum):
    ZN = "Zn"
    DN = "Dn"
    E8 = "E8"
    GENERATOR = "generator"


def _round_ties_down(y: np.ndarray) -> np.ndarray:
    # nearest integer, exact halves go to the smaller neighbour
    return np.ceil(y - 0.5)


def _decode_zn(y: np.ndarray) -> np.ndarray:
    return _round_ties_down(y)


def _decode_dn(y: np.ndarray) -> np.ndarray:
    """Closest point of D_n = {z in Z^n : sum(z) even} (Conway & Sloane)."""
    f = _round_ties_down(y)
    odd = (np.sum(f, axis=-1) % 2) != 0
    if not np.any(odd):
        return f
    # move the worst-rounded coordinate to its other neighbour
    err = y - f
    k = np.argmax(np.abs(err), axis=-1)[..., None]
    ek = np.take_along_axis(err, k, axis=-1)
    onehot = np.arange(y.shape[-1]) == k
    g = f + onehot * np.where(ek > 0, 1.0, -1.0)
    return np.where(odd[..., None], g, f)


def _lex_less(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Elementwise lexicographic ``a < b`` along the last axis."""
    diff = a != b
    first = np.argmax(diff, axis=-1)
    av = np.take_along_axis(a, first[..., None], axis=-1)[..., 0]
    bv = np.take_along_axis(b, first[..., None], axis=-1)[..., 0]
    return np.any(diff, axis=-1) & (av < bv)


def _decode_e8(y: np.ndarray) -> np.ndarray:
    """Closest point of E8 = D8 ∪ (D8 + 1/2)."""
    c0 = _decode_dn(y)
    c1 = _decode_dn(y - 0.5) + 0.5
    d0 = np.sum((y - c0) ** 2, axis=-1)
    d1 = np.sum((y - c1) ** 2, axis=-1)
    pick1 = (d1 < d0) | ((d1 == d0) & _lex_less(c1, c0))
    return np.where(pick1[..., None], c1, c0)


def _e8_basis() -> np.ndarray:
    """Columns 2e1, e2-e1, ..., e7-e6, (1/2)·1: a basis of the Gosset lattice."""
    b = np.zeros((8, 8))
    b[0, 0] = 2.0
    for j in range(1, 7):
        b[j - 1, j] = -1.0
        b[j, j] = 1.0
    b[:, 7] = 0.5
    return b


def _dn_basis(n: int) -> np.ndarray:
    b = np.zeros((n, n))
    b[0, 0], b[1, 0] = -1.0, -1.0
    for j in range(1, n):
        b[j - 1, j] = 1.0
        b[j, j] = -1.0
    return b


@dataclass(frozen=True)
class Lattice:
    """A full-rank lattice in R^n.

    ``kind`` selects a structured lattice scaled by ``scale`` (``Zn``, ``Dn``,
    ``E8``) or an arbitrary one given by the columns of ``generator``.
    """

    kind: LatticeKind
    dim: int
    scale: float = 1.0
    generator: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError("scale must be positive")
        if self.kind is LatticeKind.E8 and self.dim != 8:
            raise ValueError("E8 lives in dimension 8")
        if self.kind is LatticeKind.DN and self.dim < 2:
            raise ValueError("D_n needs n >= 2")
        if self.kind is LatticeKind.GENERATOR:
            g = np.array(self.generator, dtype=float)
            if g.shape != (self.dim, self.dim):
                raise ValueError("generator must be dim x dim")
            if abs(np.linalg.det(g)) <= 1e-12:
                raise SingularMatrix("generator matrix is not full rank")
            g.setflags(write=False)
            object.__setattr__(self, "generator", g)

    @classmethod
    def zn(cls, n: int, scale: float = 1.0) -> "Lattice":
        return cls(LatticeKind.ZN, n, scale)

    @classmethod
    def dn(cls, n: int, scale: float = 1.0) -> "Lattice":
        return cls(LatticeKind.DN, n, scale)

    @classmethod
    def e8(cls, scale: float = 1.0) -> "Lattice":
        return cls(LatticeKind.E8, 8, scale)

    @classmethod
    def from_generator(cls, generator) -> "Lattice":
        g = np.asarray(generator, dtype=float)
        return cls(LatticeKind.GENERATOR, g.shape[0], 1.0, g)

    def scaled(self, factor: float) -> "Lattice":
        if self.kind is LatticeKind.GENERATOR:
            return Lattice.from_generator(self.generator * self.scale * factor)
        return Lattice(self.kind, self.dim, self.scale * factor)

    @cached_property
    def basis(self) -> np.ndarray:
        """Generator matrix with basis vectors as columns."""
        if self.kind is LatticeKind.ZN:
            b = np.eye(self.dim)
        elif self.kind is LatticeKind.DN:
            b = _dn_basis(self.dim)
        elif self.kind is LatticeKind.E8:
            b = _e8_basis()
        else:
            b = self.generator
        return self.scale * b

    @property
    def covering_radius(self) -> float:
        if self.kind is LatticeKind.ZN:
            return self.scale * math.sqrt(self.dim) / 2
        if self.kind is LatticeKind.DN:
            return self.scale * max(1.0, math.sqrt(self.dim) / 2)
        if self.kind is LatticeKind.E8:
            return self.scale
        raise NotImplementedError("covering radius only known for structured lattices")

    def contains(self, v, tol: float = 1e-9) -> bool:
        c = np.linalg.solve(self.basis, np.asarray(v, dtype=float).T).T
        return bool(np.all(np.abs(c - np.round(c)) <= tol))


def cvp(point, lat: Lattice) -> np.ndarray:
    """Closest lattice vector to ``point`` (batched over leading axes)."""
    x = np.asarray(point, dtype=float)
    if x.shape[-1] != lat.dim:
        raise ValueError(f"point dimension {x.shape[-1]} != lattice dimension {lat.dim}")
    if lat.kind is LatticeKind.GENERATOR:
        flat = x.reshape(-1, lat.dim)
        out = np.array([_cvp_enumerate(p, lat.basis) for p in flat])
        return out.reshape(x.shape)
    y = x / lat.scale
    if lat.kind is LatticeKind.ZN:
        z = _decode_zn(y)
    elif lat.kind is LatticeKind.DN:
        z = _decode_dn(y)
    else:
        z = _decode_e8(y)
    return z * lat.scale


def _cvp_enumerate(x: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """Exact CVP for a small general lattice by bounded enumeration.

    The Babai point gives an upper bound ``r`` on the distance; any closer
    lattice vector has coefficients within ``r * ||row_i(B^-1)||`` of the real
    coefficients, which bounds the search box.
    """
    binv = np.linalg.inv(basis)
    c_real = binv @ x
    c0 = np.round(c_real)
    r = np.linalg.norm(x - basis @ c0)
    widths = r * np.linalg.norm(binv, axis=1) + 1e-9
    ranges = [
        range(int(math.ceil(c - w)), int(math.floor(c + w)) + 1)
        for c, w in zip(c_real, widths)
    ]
    cand = np.array(list(itertools.product(*ranges)), dtype=float)
    pts = cand @ basis.T
    d = np.sum((pts - x) ** 2, axis=1)
    best = d.min()
    ties = pts[d <= best + 1e-12]
    return ties[np.lexsort(ties.T[::-1])][0]


# --------------------------------------------------------------------------
# Smith normal form over the integers (Python ints, arbitrary precision)


@dataclass(frozen=True)
class SmithDecomposition:
    """``H = P @ D @ Q`` with unimodular ``P``, ``Q``; inverses kept alongside."""

    P: list
    D: list
    Q: list
    P_inv: list
    Q_inv: list

    @property
    def diagonal(self) -> list[int]:
        return [self.D[i][i] for i in range(len(self.D))]


def _as_int_matrix(H) -> list[list[int]]:
    rows = [[int(v) for v in row] for row in np.asarray(H, dtype=object).tolist()]
    n = len(rows)
    if any(len(r) != n for r in rows):
        raise ValueError("H must be square")
    return rows


def _eye(n: int) -> list[list[int]]:
    return [[int(i == j) for j in range(n)] for i in range(n)]


def int_matmul(a, b) -> list[list[int]]:
    return [[sum(x * y for x, y in zip(row, col)) for col in zip(*b)] for row in a]


def int_det(a) -> int:
    """Determinant by fraction-free (Bareiss) elimination."""
    m = [list(r) for r in a]
    n = len(m)
    sign, prev = 1, 1
    for k in range(n - 1):
        if m[k][k] == 0:
            for i in range(k + 1, n):
                if m[i][k] != 0:
                    m[k], m[i] = m[i], m[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) // prev
        prev = m[k][k]
    return sign * m[n - 1][n - 1]


def smith_decomposition(H) -> SmithDecomposition:
    A = _as_int_matrix(H)
    n = len(A)
    if int_det(A) == 0:
        raise SingularMatrix("H is singular")
    P, Pi, Q, Qi = _eye(n), _eye(n), _eye(n), _eye(n)

    # invariant H = P A Q; Pi = P^-1, Qi = Q^-1
    def row_addmul(i, t, q):  # row_i -= q * row_t
        A[i] = [a - q * b for a, b in zip(A[i], A[t])]
        Pi[i] = [a - q * b for a, b in zip(Pi[i], Pi[t])]
        for r in P:
            r[t] += q * r[i]

    def col_addmul(j, t, q):  # col_j -= q * col_t
        for r in A:
            r[j] -= q * r[t]
        for r in Qi:
            r[j] -= q * r[t]
        Q[t] = [a + q * b for a, b in zip(Q[t], Q[j])]

    def swap_rows(i, t):
        A[i], A[t] = A[t], A[i]
        Pi[i], Pi[t] = Pi[t], Pi[i]
        for r in P:
            r[i], r[t] = r[t], r[i]

    def swap_cols(j, t):
        for r in A:
            r[j], r[t] = r[t], r[j]
        for r in Qi:
            r[j], r[t] = r[t], r[j]
        Q[j], Q[t] = Q[t], Q[j]

    for t in range(n):
        while True:
            piv = min(
                ((abs(A[i][j]), i, j) for i in range(t, n) for j in range(t, n) if A[i][j]),
                default=None,
            )
            if piv is None:
                raise SingularMatrix("H is singular")
            _, i, j = piv
            if i != t:
                swap_rows(i, t)
            if j != t:
                swap_cols(j, t)
            p = A[t][t]
            clean = True
            for i in range(t + 1, n):
                if A[i][t]:
                    row_addmul(i, t, A[i][t] // p)
                    clean = clean and A[i][t] == 0
            for j in range(t + 1, n):
                if A[t][j]:
                    col_addmul(j, t, A[t][j] // p)
                    clean = clean and A[t][j] == 0
            if not clean:
                continue
            bad = next(
                (i for i in range(t + 1, n) for j in range(t + 1, n) if A[i][j] % p),
                None,
            )
            if bad is None:
                break
            # row_t += row_bad brings a non-divisible entry into row t
            row_addmul(t, bad, -1)
        if A[t][t] < 0:
            A[t] = [-a for a in A[t]]
            Pi[t] = [-a for a in Pi[t]]
            for r in P:
                r[t] = -r[t]
    return SmithDecomposition(P, A, Q, Pi, Qi)


def smith_normal_form(H) -> tuple[list, list, list]:
    """Return integer matrices ``(P, D, Q)`` with ``H = P D Q``.

    ``P`` and ``Q`` are unimodular and ``D`` is diagonal with positive
    entries ``d_1 | d_2 | ... | d_n``. Raises :class:`SingularMatrix`.
    """
    s = smith_decomposition(H)
    return s.P, s.D, s.Q


# --------------------------------------------------------------------------
# quotients and group codes


@dataclass(frozen=True, eq=False)
class QuotientGroup:
    """The finite abelian group ``fine / coarse``.

    Attributes:
        invariant_factors: full SNF diagonal of ``H = A_fine^-1 A_coarse``.
        factors: the nontrivial factors ``d_m, ..., d_n`` (all > 1).
        generators: ambient coordinates of one fine-lattice vector per
            nontrivial factor; generator ``j`` has order ``factors[j]``.
    """

    fine: Lattice
    coarse: Lattice
    H: list
    snf: SmithDecomposition

    @property
    def invariant_factors(self) -> list[int]:
        return self.snf.diagonal

    @property
    def first_nontrivial(self) -> int:
        d = self.invariant_factors
        return next((i for i, v in enumerate(d) if v > 1), len(d))

    @property
    def factors(self) -> list[int]:
        return self.invariant_factors[self.first_nontrivial :]

    @property
    def order(self) -> int:
        return math.prod(self.factors)

    @property
    def exponent(self) -> int:
        return self.factors[-1] if self.factors else 1

    @cached_property
    def adapted_basis(self) -> np.ndarray:
        """Columns of ``A_fine @ P``: a fine basis aligned with the SNF."""
        return self.fine.basis @ np.array(self.snf.P, dtype=float)

    @property
    def generators(self) -> np.ndarray:
        return self.adapted_basis[:, self.first_nontrivial :]

    @cached_property
    def _coarse_inv(self) -> np.ndarray:
        return np.linalg.inv(self.coarse.basis)

    def reduce(self, x) -> np.ndarray:
        """Reduce ``x`` modulo the coarse lattice into its fundamental box."""
        x = np.asarray(x, dtype=float)
        c = x @ self._coarse_inv.T
        frac = c - np.floor(c)
        frac = np.where(frac > 1.0 - 1e-12, 0.0, frac)
        return frac @ self.coarse.basis.T

    def vector_of(self, w) -> np.ndarray:
        """Coset representative of the index vector ``w`` (one entry per factor)."""
        w = np.asarray(w)
        self._check_index(w)
        return self.reduce(w @ self.generators.T)

    def index_of(self, x) -> np.ndarray:
        """Index vector of the coset containing the fine-lattice vector ``x``."""
        x = np.asarray(x, dtype=float)
        c = np.rint(np.linalg.solve(self.fine.basis, x.T).T).astype(np.int64)
        pinv = np.array(self.snf.P_inv, dtype=np.int64)
        w = c @ pinv.T
        d = np.array(self.factors, dtype=np.int64)
        return w[..., self.first_nontrivial :] % d

    def _check_index(self, w):
        d = np.array(self.factors)
        if w.shape[-1] != d.size or np.any(w < 0) or np.any(w >= d):
            raise IndexOutOfRange(f"index must satisfy 0 <= w_i < d_i for d = {self.factors}")

    def to_residue(self, x) -> np.ndarray:
        """Integer coordinates ``exponent * A_coarse^-1 x mod exponent``."""
        e = self.exponent
        c = np.asarray(x, dtype=float) @ self._coarse_inv.T
        return np.rint(c * e).astype(np.int64) % e

    def from_residue(self, t) -> np.ndarray:
        return (np.asarray(t, dtype=float) / self.exponent) @ self.coarse.basis.T


def quotient_add(q: QuotientGroup, a, b) -> np.ndarray:
    """Group law on reduced coset representatives."""
    return q.reduce(np.asarray(a, dtype=float) + np.asarray(b, dtype=float))


def build_quotient(fine: Lattice, coarse: Lattice, tol: float = 1e-6) -> QuotientGroup:
    """Compute ``H = A_fine^-1 A_coarse`` and its Smith normal form."""
    if fine.dim != coarse.dim:
        raise ValueError("lattices must share the dimension")
    ab = coarse.basis
    gram = ab.T @ ab
    diag = np.sqrt(np.diag(gram))
    off = gram - np.diag(np.diag(gram))
    if np.any(np.abs(off) > tol * np.outer(diag, diag)):
        raise NotOrthogonal("coarse basis must be orthogonal")
    H = np.linalg.solve(fine.basis, ab)
    Hr = np.rint(H)
    if np.any(np.abs(H - Hr) > tol * np.maximum(1.0, np.abs(Hr))):
        raise NotNested("coarse lattice is not contained in the fine lattice")
    Hi = [[int(v) for v in row] for row in Hr.astype(np.int64).tolist()]
    return QuotientGroup(fine, coarse, Hi, smith_decomposition(Hi))


@dataclass(frozen=True, eq=False)
class SphericalGroupCode:
    """Commutative group code on S^{2n-1} carried by a lattice quotient.

    ``quotient`` is expressed in box coordinates, i.e. already scaled by
    ``2 pi / b`` so that the coarse lattice is ``prod 2 pi xi_i Z``.
    """

    quotient: QuotientGroup
    xi: FoliationProfile
    R: np.ndarray

    @property
    def sigma(self) -> np.ndarray:
        return torus_map(np.zeros(self.xi.n), self.xi)

    @property
    def order(self) -> int:
        return self.quotient.order

    @property
    def factors(self) -> list[int]:
        return self.quotient.factors

    @property
    def generator_rotation_angles(self) -> np.ndarray:
        """Row ``j``: rotation angle of generator ``j`` in every coordinate pair."""
        m = self.quotient.first_nontrivial
        return (TWO_PI * self.R[:, m:].T) % TWO_PI

    def rotation_matrix(self, j: int) -> np.ndarray:
        """Dense ``2n x 2n`` block-diagonal rotation of generator ``j``."""
        n = self.xi.n
        g = np.zeros((2 * n, 2 * n))
        for l, a in enumerate(self.generator_rotation_angles[j]):
            c, s = np.cos(a), np.sin(a)
            g[2 * l : 2 * l + 2, 2 * l : 2 * l + 2] = [[c, -s], [s, c]]
        return g

    def apply(self, w, p) -> np.ndarray:
        """Rotate ``p`` by ``G_1^w_1 ... G_k^w_k`` using per-pair angle sums."""
        w = np.asarray(w, dtype=float)
        theta = (w @ self.generator_rotation_angles) % TWO_PI
        p = np.asarray(p, dtype=float)
        a, b = p[..., 0::2], p[..., 1::2]
        c, s = np.cos(theta), np.sin(theta)
        out = np.empty_like(p)
        out[..., 0::2] = c * a - s * b
        out[..., 1::2] = s * a + c * b
        return out

    def codeword(self, w) -> np.ndarray:
        w = np.asarray(w)
        self.quotient._check_index(w)
        return self.apply(w, self.sigma)

    def indices(self, limit: int = 10_000):
        if self.order > limit:
            raise ValueError(f"refusing to enumerate a code of order {self.order}")
        return itertools.product(*(range(d) for d in self.factors))

    def enumerate(self, limit: int = 10_000) -> np.ndarray:
        return np.array([self.codeword(w) for w in self.indices(limit)])


def build_group_code(q: QuotientGroup) -> SphericalGroupCode:
    """Group code of a quotient whose coarse basis is axis aligned."""
    ab = q.coarse.basis
    if np.any(np.abs(ab - np.diag(np.diag(ab))) > 1e-12 * np.abs(ab).max()) or np.any(np.diag(ab) <= 0):
        raise NotOrthogonal("group code construction needs a positive diagonal coarse basis")
    b_i = np.linalg.norm(ab, axis=0)
    b = float(np.sqrt(np.sum(b_i**2)))
    xi = FoliationProfile(b_i / b)
    scale = TWO_PI / b
    if abs(scale - 1.0) > 1e-12:
        q = QuotientGroup(q.fine.scaled(scale), q.coarse.scaled(scale), q.H, q.snf)
    R = np.linalg.solve(q.coarse.basis, q.adapted_basis)
    return SphericalGroupCode(q, xi, R)


# --------------------------------------------------------------------------
# lattice pairs used by the cipher and by small test codes


def cipher_lattices(bits: int = 16) -> tuple[Lattice, Lattice]:
    """Fine ``(2 pi/(2^bits sqrt 8)) E8`` and coarse ``(2 pi/sqrt 8) Z^8``."""
    s8 = math.sqrt(8.0)
    return Lattice.e8(TWO_PI / (2**bits * s8)), Lattice.zn(8, TWO_PI / s8)


def cyclic_plane_lattices(order: int = 4, xi=(0.8, 0.6)) -> tuple[Lattice, Lattice]:
    """Index-``order`` cyclic nesting in R^2, coarse ``2 pi xi_1 Z x 2 pi xi_2 Z``.

    The fine lattice is generated by ``(beta_1 + beta_2)/order`` and ``beta_2``.
    """
    b1 = np.array([TWO_PI * xi[0], 0.0])
    b2 = np.array([0.0, TWO_PI * xi[1]])
    fine = Lattice.from_generator(np.column_stack([(b1 + b2) / order, b2]))
    coarse = Lattice.from_generator(np.column_stack([b1, b2]))
    return fine, coarse
