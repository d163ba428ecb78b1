"""Rhombic (diamond) lattice with a Peierls flux through every rhomb.

Sites are ordered C_1, A_1, B_1, C_2, A_2, B_2, ..., C_{M+1}, so a lattice of
M rhombs has L = 3M + 1 sites.  The flux enters through the hub-to-arm bonds
of each cell: C_m-A_m carries exp(+i phi/2), C_m-B_m carries exp(-i phi/2) and
the two bonds into C_{m+1} are real.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class Sublattice(str, enum.Enum):
    C = "C"
    A = "A"
    B = "B"


_OFFSET = {Sublattice.C: 0, Sublattice.A: 1, Sublattice.B: 2}


@dataclass(frozen=True)
class LatticeSpec:
    """Geometry and couplings of a finite flux rhombic lattice.

    ``phi`` is kept as given (not folded into [0, 2 pi)).
    """

    M: int
    J: float = 1.0
    phi: float = 0.0
    U: float = 0.0

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 1:
            raise ValueError(f"M must be a positive integer, got {self.M!r}")
        if not self.J > 0:
            raise ValueError(f"J must be positive, got {self.J!r}")
        if not np.isfinite(self.phi):
            raise ValueError(f"phi must be finite, got {self.phi!r}")
        if not self.U >= 0:
            raise ValueError(f"U must be non-negative, got {self.U!r}")
        object.__setattr__(self, "M", int(self.M))

    @property
    def L(self) -> int:
        return 3 * self.M + 1

    def site(self, cell: int, sublattice: str | Sublattice) -> "SiteIndex":
        return site_index(self.M, cell, sublattice)

    def labels(self) -> list[str]:
        """Site labels in storage order, e.g. ``['C1', 'A1', 'B1', 'C2', ...]``."""
        out = []
        for m in range(1, self.M + 1):
            out += [f"C{m}", f"A{m}", f"B{m}"]
        out.append(f"C{self.M + 1}")
        return out


@dataclass(frozen=True)
class SiteIndex:
    """A lattice site.  ``flat`` is 1-based (l = 1..L); ``index`` is the array offset."""

    cell: int
    sublattice: Sublattice
    flat: int

    @property
    def index(self) -> int:
        return self.flat - 1


def site_index(M: int, cell: int, sublattice: str | Sublattice) -> SiteIndex:
    """Locate site ``sublattice``_``cell`` in a lattice of ``M`` rhombs.

    >>> site_index(3, 2, "A").flat
    5
    """
    sub = Sublattice(sublattice)
    if not 1 <= cell <= M + 1:
        raise ValueError(f"cell must lie in 1..{M + 1}, got {cell}")
    if cell == M + 1 and sub is not Sublattice.C:
        raise ValueError(f"cell {cell} is the closing hub; only C exists there")
    return SiteIndex(cell, sub, 3 * (cell - 1) + _OFFSET[sub] + 1)


def hub_indices(M: int) -> np.ndarray:
    """Array offsets of C_1 .. C_{M+1}."""
    return 3 * np.arange(M + 1)


def bonds(spec: LatticeSpec) -> list[tuple[int, int, complex]]:
    """Bonds as ``(i, j, H[i, j])`` with i < j in storage order; H[j, i] is the conjugate."""
    half = -0.5 * spec.J
    up = np.exp(0.5j * spec.phi)
    out = []
    for m in range(spec.M):
        c, a, b, c_next = 3 * m, 3 * m + 1, 3 * m + 2, 3 * m + 3
        out += [
            (c, a, half * up),
            (c, b, half * np.conj(up)),
            (a, c_next, complex(half)),
            (b, c_next, complex(half)),
        ]
    return out


def build_hamiltonian(spec: LatticeSpec) -> np.ndarray:
    """Single-particle hopping matrix, prefactor -1/2 included.

    Entries: H[C_m, A_m] = -(J/2) e^{i phi/2}, H[C_m, B_m] = -(J/2) e^{-i phi/2},
    H[A_m, C_{m+1}] = H[B_m, C_{m+1}] = -J/2, lower triangle by conjugation.
    """
    H = np.zeros((spec.L, spec.L), dtype=complex)
    for i, j, h in bonds(spec):
        H[i, j] = h
        H[j, i] = np.conj(h)
    return H


def mirror_permutation(M: int) -> np.ndarray:
    """Permutation exchanging A_m and B_m in every cell."""
    perm = np.arange(3 * M + 1)
    perm[1::3][:M], perm[2::3][:M] = perm[2::3][:M].copy(), perm[1::3][:M].copy()
    return perm


def bloch_bands(phi, kappa, J: float = 1.0):
    """The three Bloch bands ``(eps_0, eps_minus, eps_plus)``.

    eps_pm = pm J sqrt(1 + cos(phi/2) cos(kappa - phi/2)); broadcasts over
    array arguments.
    """
    phi = np.asarray(phi, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    arg = 1.0 + np.cos(0.5 * phi) * np.cos(kappa - 0.5 * phi)
    eps = J * np.sqrt(np.clip(arg, 0.0, None))
    return np.zeros_like(eps), -eps, eps


def bloch_matrix(phi: float, kappa: float, J: float = 1.0, align_origin: bool = True) -> np.ndarray:
    """3x3 Bloch Hamiltonian of one (C, A, B) cell.

    The hoppings are those of :func:`build_hamiltonian`.  Translation by one
    cell is represented by exp(-i q), where q = kappa - phi/2 when
    ``align_origin`` is set, so that the eigenvalues coincide pointwise with
    :func:`bloch_bands`.  With ``align_origin=False`` q = kappa and the bands
    are the same curves shifted by phi/2 in quasimomentum.
    """
    q = kappa - 0.5 * phi if align_origin else kappa
    shift = np.exp(-1j * q)
    h_ca = -0.5 * J * (np.exp(0.5j * phi) + shift)
    h_cb = -0.5 * J * (np.exp(-0.5j * phi) + shift)
    h = np.zeros((3, 3), dtype=complex)
    h[0, 1], h[0, 2] = h_ca, h_cb
    h[1, 0], h[2, 0] = np.conj(h_ca), np.conj(h_cb)
    return h


def band_envelope(phi: float, J: float = 1.0) -> float:
    """Largest |energy| reached by the dispersive bands, J sqrt(1 + |cos(phi/2)|)."""
    return J * np.sqrt(1.0 + abs(np.cos(0.5 * phi)))
