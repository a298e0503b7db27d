"""Sector basis and sparse operators for the two-beam spin ladder.

The ladder has two chains ("beams") of ``rungs`` spin-1/2 sites each. The
total z magnetization is conserved, so all operators act inside one fixed-Sz
sector enumerated as an ascending list of bit patterns. Bit layout: left beam
occupies bits ``0 .. L-1``, right beam bits ``L .. 2L-1``, a set bit means
spin up.

Operators are stored as real symmetric CSR matrices; in this computational
basis every operator of the model is real.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse
from math import comb

from . import kernels

CONVENTIONS = ("half", "pauli")


@dataclass(frozen=True)
class LadderConfig:
    """Model parameters of the anisotropic two-beam ladder.

    ``spin_convention`` selects the operator normalization of the beam and
    rung couplings: ``half`` builds them from spin-1/2 operators (eigenvalues
    +-1/2), ``pauli`` from Pauli matrices (+-1), which multiplies all
    energies by 4. The magnetization-difference observable always counts in
    integer steps and is unaffected by this switch.
    """

    rungs: int = 8
    beam_coupling: float = 1.0
    rung_coupling: float = 0.2
    anisotropy: float = 0.6
    total_sz: float = 0.0
    spin_convention: str = "half"

    def __post_init__(self):
        if self.rungs < 2:
            raise ValueError(f"rungs must be >= 2, got {self.rungs}")
        if self.rung_coupling < 0:
            raise ValueError(f"rung coupling must be >= 0, got {self.rung_coupling}")
        if self.spin_convention not in CONVENTIONS:
            raise ValueError(
                f"spin_convention must be one of {CONVENTIONS}, got {self.spin_convention!r}"
            )
        n = self.n_sites
        if abs(self.total_sz) > n / 2:
            raise ValueError(
                f"total Sz {self.total_sz} outside the valid range [{-n / 2}, {n / 2}]"
            )
        n_up = n / 2 + self.total_sz
        if abs(n_up - round(n_up)) > 1e-12:
            raise ValueError(
                f"total Sz {self.total_sz} incompatible with {n} sites: "
                f"N/2 + Sz must be an integer in [0, {n}]"
            )

    @property
    def n_sites(self):
        return 2 * self.rungs

    @property
    def n_up(self):
        return round(self.n_sites / 2 + self.total_sz)

    @property
    def spin_scale(self):
        """Single-site Sz eigenvalue magnitude: 1/2 for half, 1 for pauli."""
        return 0.5 if self.spin_convention == "half" else 1.0


@dataclass
class SectorBasis:
    """Ascending bit-pattern basis of a fixed total-Sz sector."""

    n_sites: int
    rungs: int
    n_up: int
    states: np.ndarray = field(repr=False)

    @property
    def dim(self):
        return self.states.shape[0]

    @property
    def left_mask(self):
        return (1 << self.rungs) - 1

    def index_of(self, patterns):
        """Positions of bit patterns in the basis (inverse of ``states``)."""
        patterns = np.asarray(patterns, dtype=np.int64)
        idx = np.searchsorted(self.states, patterns)
        bad = (idx >= self.dim) | (self.states[np.minimum(idx, self.dim - 1)] != patterns)
        if np.any(bad):
            raise KeyError(f"pattern(s) not in sector: {np.asarray(patterns)[bad][:5]}")
        return idx

    def left_up_counts(self):
        """Number of up spins on the left beam, one entry per basis state."""
        return kernels.popcount(self.states & self.left_mask)

    def x_values(self):
        """Magnetization-difference eigenvalue per basis state, (n_L - n_R)/2."""
        n_l = self.left_up_counts()
        n_r = self.n_up - n_l
        return (n_l - n_r) / 2.0

    def swap_permutation(self):
        """Basis permutation induced by exchanging the two beams."""
        left = self.states & self.left_mask
        right = self.states >> self.rungs
        swapped = (left << self.rungs) | right
        return self.index_of(swapped)


def build_basis(config: LadderConfig) -> SectorBasis:
    """Enumerate the fixed-Sz sector of the ladder.

    The sector holds binomial(N, N/2 + Sz) states, listed in strictly
    ascending bit-pattern order so that index lookup is a binary search.
    """
    n = config.n_sites
    states = kernels.sector_states(n, config.n_up)
    return SectorBasis(n_sites=n, rungs=config.rungs, n_up=config.n_up, states=states)


@dataclass
class SparseOperator:
    """Real symmetric sparse matrix (CSR) over a sector basis."""

    dim: int
    indptr: np.ndarray = field(repr=False)
    indices: np.ndarray = field(repr=False)
    data: np.ndarray = field(repr=False)
    hermitian: bool = True

    @classmethod
    def from_scipy(cls, mat, hermitian=True):
        mat = scipy.sparse.csr_matrix(mat)
        mat.sum_duplicates()
        mat.sort_indices()
        return cls(
            dim=mat.shape[0],
            indptr=mat.indptr.astype(np.int64),
            indices=mat.indices.astype(np.int64),
            data=mat.data.astype(np.float64),
            hermitian=hermitian,
        )

    @classmethod
    def from_parts(cls, dim, diag, rows, cols, vals, hermitian=True):
        """Assemble from a diagonal plus off-diagonal triplets."""
        d_rows = np.arange(dim, dtype=np.int64)
        nz = diag != 0.0
        coo = scipy.sparse.coo_matrix(
            (
                np.concatenate([diag[nz], vals]),
                (np.concatenate([d_rows[nz], rows]), np.concatenate([d_rows[nz], cols])),
            ),
            shape=(dim, dim),
        )
        return cls.from_scipy(coo.tocsr(), hermitian=hermitian)

    @classmethod
    def diagonal(cls, values):
        values = np.asarray(values, dtype=np.float64)
        dim = values.shape[0]
        return cls.from_scipy(scipy.sparse.diags(values, format="csr"), hermitian=True)

    @property
    def nnz(self):
        return self.data.shape[0]

    def row(self, i):
        """(columns, values) stored for row ``i``."""
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.data[lo:hi]

    def to_scipy(self):
        return scipy.sparse.csr_matrix(
            (self.data, self.indices, self.indptr), shape=(self.dim, self.dim)
        )

    def to_dense(self):
        return self.to_scipy().toarray()

    def apply(self, v):
        v = np.asarray(v)
        if v.shape != (self.dim,):
            raise ValueError(f"dimension mismatch: operator dim {self.dim}, vector {v.shape}")
        return kernels.csr_matvec(self.indptr, self.indices, self.data, v)

    def scaled_add(self, other, coeff):
        """self + coeff * other, as a new operator."""
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        return SparseOperator.from_scipy(
            self.to_scipy() + coeff * other.to_scipy(),
            hermitian=self.hermitian and other.hermitian,
        )


def apply(op: SparseOperator, v):
    """Sparse matrix-vector product; see :meth:`SparseOperator.apply`."""
    return op.apply(v)


def _assemble(basis, sites_a, sites_b, flip, zz):
    diag, rows, cols, vals = kernels.xxz_assemble(basis.states, sites_a, sites_b, flip, zz)
    return SparseOperator.from_parts(basis.dim, diag, rows, cols, vals)


def build_h0(basis: SectorBasis, config: LadderConfig) -> SparseOperator:
    """Decoupled-beams Hamiltonian: open XXZ chains along both beams.

    Each beam contributes L-1 nearest-neighbor bonds with exchange J and
    Sz-Sz anisotropy ``anisotropy`` * J; there are no rung terms, so this
    operator is block diagonal in the magnetization difference.
    """
    L = config.rungs
    s2 = config.spin_scale ** 2
    a, b = [], []
    for beam in (0, L):
        for i in range(L - 1):
            a.append(beam + i)
            b.append(beam + i + 1)
    nb = len(a)
    flip = np.full(nb, config.beam_coupling * 2.0 * s2)
    zz = np.full(nb, config.beam_coupling * config.anisotropy * s2)
    return _assemble(basis, np.array(a), np.array(b), flip, zz)


def build_v(basis: SectorBasis, config: LadderConfig) -> SparseOperator:
    """Unit-strength rung coupling: one XXZ bond per rung.

    The rung coupling constant enters only once, via H = H0 + kappa * V; V
    itself carries unit exchange. Its flip-flop part moves exactly one unit
    of magnetization between the beams, so it couples only neighboring
    magnetization-difference subspaces.
    """
    L = config.rungs
    s2 = config.spin_scale ** 2
    a = np.arange(L)
    b = a + L
    flip = np.full(L, 2.0 * s2)
    zz = np.full(L, config.anisotropy * s2)
    return _assemble(basis, a, b, flip, zz)


def build_hamiltonian(basis: SectorBasis, config: LadderConfig) -> SparseOperator:
    """Full ladder Hamiltonian H = H0 + kappa * V."""
    return build_h0(basis, config).scaled_add(build_v(basis, config), config.rung_coupling)


def build_x_observable(basis: SectorBasis) -> SparseOperator:
    """Magnetization difference between the beams, diagonal in this basis.

    Counts (n_left_up - n_right_up)/2, i.e. integer eigenvalues
    -L/2 .. L/2 in the Sz=0 sector. Deliberately convention independent.
    """
    return SparseOperator.diagonal(basis.x_values())


@dataclass(frozen=True)
class XProjector:
    """Projector onto one magnetization-difference subspace, as an index set."""

    x: float
    indices: np.ndarray = field(repr=False)

    @property
    def dim(self):
        return self.indices.shape[0]


def build_projectors(basis: SectorBasis) -> list[XProjector]:
    """Partition of the sector by magnetization difference X, ascending in X."""
    xvals = basis.x_values()
    out = []
    for x in np.unique(xvals):
        idx = np.nonzero(xvals == x)[0]
        out.append(XProjector(x=float(x), indices=idx))
    return out


def partition_arrays(projectors):
    """(x values, permutation, offsets) for segment sums over the partition."""
    xs = np.array([p.x for p in projectors])
    perm = np.concatenate([p.indices for p in projectors])
    offsets = np.zeros(len(projectors) + 1, dtype=np.int64)
    np.cumsum([p.dim for p in projectors], out=offsets[1:])
    return xs, perm, offsets


def subspace_dimension(rungs, x, total_sz=0.0):
    """Combinatorial dimension of the X subspace at the given sector."""
    n_up = round(rungs + total_sz)
    n_l = round(n_up / 2 + x)
    n_r = n_up - n_l
    if not (0 <= n_l <= rungs and 0 <= n_r <= rungs):
        return 0
    return comb(rungs, n_l) * comb(rungs, n_r)
