"""Eigendecompositions: full sector, beam-swap parity blocks, chain factorization.

Three distinct spectral objects are used downstream:

* a full decomposition of a Hermitian sector operator (usually H), with
  degeneracies resolved to definite beam-swap parity by solving the even and
  odd swap sectors separately;
* the energy-window projector built from eigenvalue index sets;
* the eigenbasis of the decoupled Hamiltonian, obtained structurally as
  products of single-chain eigenstates (largest chain block is 70-dim at
  8 rungs, so this part never needs a large dense solve).
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse

from . import kernels
from .ladder import LadderConfig, SectorBasis, SparseOperator, build_projectors

DENSE_CEILING_DEFAULT = 20000
_SQ2 = 1.0 / np.sqrt(2.0)


class DimensionBudgetError(RuntimeError):
    """Dense diagonalization refused because the dimension exceeds the budget."""


@dataclass
class SpectralDecomposition:
    """Ascending eigensystem of a real symmetric operator.

    Eigenvectors are exposed through :meth:`vectors` so that parity-blocked
    storage materializes only the requested columns.
    """

    eigenvalues: np.ndarray
    parity: np.ndarray | None = None
    _dense_u: np.ndarray | None = field(default=None, repr=False)
    _blocks: tuple | None = field(default=None, repr=False)
    _order: np.ndarray | None = field(default=None, repr=False)
    _space_dim: int | None = None

    @property
    def dim(self):
        return self.eigenvalues.shape[0]

    @property
    def space_dim(self):
        """Dimension of the underlying vector space (= dim unless subset)."""
        if self._space_dim is not None:
            return self._space_dim
        if self._dense_u is not None:
            return self._dense_u.shape[0]
        return self._blocks[0][0].shape[0]

    def vectors(self, indices=None):
        """Eigenvector matrix, one column per requested eigenindex."""
        if indices is None:
            indices = np.arange(self.dim)
        indices = np.asarray(indices, dtype=np.int64)
        if self._dense_u is not None:
            return np.ascontiguousarray(self._dense_u[:, indices])
        src = self._order[indices]
        out = np.empty((self.space_dim, indices.shape[0]), dtype=np.float64)
        offset = 0
        for t, u in self._blocks:
            n = u.shape[1]
            local = src - offset
            sel = np.nonzero((local >= 0) & (local < n))[0]
            if sel.shape[0]:
                out[:, sel] = t @ u[:, local[sel]]
            offset += n
        return out

    def vector(self, i):
        return self.vectors(np.array([i]))[:, 0]

    def diagonal_expectations(self, diag_values, chunk=1024):
        """<n|A|n> for a diagonal operator A, for every eigenstate."""
        diag_values = np.asarray(diag_values, dtype=np.float64)
        out = np.empty(self.dim)
        for lo in range(0, self.dim, chunk):
            idx = np.arange(lo, min(lo + chunk, self.dim))
            u = self.vectors(idx)
            out[idx] = diag_values @ (u * u)
        return out


def _parity_transforms(basis: SectorBasis):
    d = basis.dim
    perm = basis.swap_permutation()
    ident = np.arange(d)
    fixed = np.nonzero(perm == ident)[0]
    rep = np.nonzero(perm > ident)[0]
    partner = perm[rep]
    n_pairs = rep.shape[0]

    rows_e = np.concatenate([rep, partner, fixed])
    cols_e = np.concatenate(
        [np.arange(n_pairs), np.arange(n_pairs), n_pairs + np.arange(fixed.shape[0])]
    )
    vals_e = np.concatenate([np.full(2 * n_pairs, _SQ2), np.ones(fixed.shape[0])])
    t_even = scipy.sparse.csr_matrix(
        (vals_e, (rows_e, cols_e)), shape=(d, n_pairs + fixed.shape[0])
    )

    rows_o = np.concatenate([rep, partner])
    cols_o = np.concatenate([np.arange(n_pairs), np.arange(n_pairs)])
    vals_o = np.concatenate([np.full(n_pairs, _SQ2), np.full(n_pairs, -_SQ2)])
    t_odd = scipy.sparse.csr_matrix((vals_o, (rows_o, cols_o)), shape=(d, n_pairs))
    return t_even, t_odd


def _swap_invariant(op: SparseOperator, perm):
    mat = op.to_scipy()
    permuted = mat[perm][:, perm]
    diff = (permuted - mat).tocoo()
    return diff.nnz == 0 or np.abs(diff.data).max() < 1e-12


def _diagonalize_parity(op: SparseOperator, basis: SectorBasis, subset_by_value):
    mat = op.to_scipy()
    blocks = []
    evals = []
    parities = []
    for t, sign in zip(_parity_transforms(basis), (1, -1)):
        small = (t.T @ (mat @ t)).toarray()
        if subset_by_value is not None:
            w, u = scipy.linalg.eigh(small, subset_by_value=subset_by_value)
        else:
            w, u = scipy.linalg.eigh(small)
        blocks.append((t, u))
        evals.append(w)
        parities.append(np.full(w.shape[0], sign, dtype=np.int8))
    w_all = np.concatenate(evals)
    p_all = np.concatenate(parities)
    order = np.argsort(w_all, kind="stable")
    return SpectralDecomposition(
        eigenvalues=w_all[order],
        parity=p_all[order],
        _blocks=tuple(blocks),
        _order=order,
        _space_dim=basis.dim,
    )


def diagonalize_dense(op, basis: SectorBasis | None = None,
                      ceiling: int = DENSE_CEILING_DEFAULT,
                      subset_by_value=None) -> SpectralDecomposition:
    """Dense eigensystem of a Hermitian operator (matrix or SparseOperator).

    When ``basis`` is supplied and the operator commutes with the beam-swap
    permutation, the even and odd swap sectors are solved independently, so
    every eigenvector carries a definite parity label; degenerate multiplets
    then never mix the two parities. ``subset_by_value=(lo, hi)`` restricts
    the returned pairs to eigenvalues in the closed interval.

    Refuses dimensions above ``ceiling`` with a hint that the window-free
    pipeline does not need this solve.
    """
    if isinstance(op, np.ndarray):
        dim = op.shape[0]
        sp_op = None
    else:
        dim = op.dim
        sp_op = None if not isinstance(op, SparseOperator) else op
        if sp_op is None:
            raise TypeError(f"unsupported operator type {type(op)!r}")
    if dim > ceiling:
        raise DimensionBudgetError(
            f"dense diagonalization of dimension {dim} exceeds the budget {ceiling}; "
            "raise the ceiling explicitly, or use the window-free pipeline "
            "(pure-state or typicality evolution needs no dense eigenvectors)"
        )

    if sp_op is not None and basis is not None:
        perm = basis.swap_permutation()
        if _swap_invariant(sp_op, perm):
            return _diagonalize_parity(sp_op, basis, subset_by_value)

    dense = op if sp_op is None else sp_op.to_dense()
    if subset_by_value is not None:
        w, u = scipy.linalg.eigh(dense, subset_by_value=subset_by_value)
    else:
        w, u = scipy.linalg.eigh(dense)
    return SpectralDecomposition(eigenvalues=w, parity=None, _dense_u=u, _space_dim=dim)


@dataclass(frozen=True)
class WindowProjector:
    """Spectral projector stored as the set of retained eigenindices.

    Idempotence and commutation with the diagonalized operator hold by
    construction; edges of the window are inclusive.
    """

    center: float
    width: float
    eigen_indices: np.ndarray = field(repr=False)

    @property
    def rank(self):
        return self.eigen_indices.shape[0]


def window_projector(spec: SpectralDecomposition, center: float, width: float) -> WindowProjector:
    """Eigenindices with eigenvalue in [center - width/2, center + width/2].

    An empty window yields an empty index set; the caller decides whether
    that is an error.
    """
    if width <= 0:
        raise ValueError(f"window width must be > 0, got {width}")
    lo, hi = center - width / 2.0, center + width / 2.0
    idx = np.nonzero((spec.eigenvalues >= lo) & (spec.eigenvalues <= hi))[0]
    return WindowProjector(center=center, width=width, eigen_indices=idx)


# --------------------------------------------------------------------------
# chain-factorized H0 eigenbasis
# --------------------------------------------------------------------------

def chain_xxz_dense(rungs, n_up, config: LadderConfig):
    """Dense single-chain XXZ Hamiltonian in the fixed-up-count chain sector."""
    states = kernels.sector_states(rungs, n_up)
    sites_a = np.arange(rungs - 1)
    sites_b = sites_a + 1
    s2 = config.spin_scale ** 2
    flip = np.full(rungs - 1, config.beam_coupling * 2.0 * s2)
    zz = np.full(rungs - 1, config.beam_coupling * config.anisotropy * s2)
    diag, rows, cols, vals = kernels.xxz_assemble(states, sites_a, sites_b, flip, zz)
    dense = np.zeros((states.shape[0], states.shape[0]))
    dense[rows, cols] = vals
    dense[np.arange(states.shape[0]), np.arange(states.shape[0])] = diag
    return states, dense


@dataclass
class ChainSectorEig:
    """Eigenpairs of one open XXZ chain restricted to a fixed up count."""

    n_up: int
    states: np.ndarray = field(repr=False)
    energies: np.ndarray = field(repr=False)
    vectors: np.ndarray = field(repr=False)

    @property
    def dim(self):
        return self.energies.shape[0]


@dataclass
class ChainBlock:
    """One magnetization-difference block of the H0 product eigenbasis.

    Product label p = b * dim_left + a pairs right-chain eigenstate b with
    left-chain eigenstate a; with the same flattening, the block coordinates
    match the ascending bit-pattern order of the sector states inside the
    block, so embedding a product state is a Kronecker product.
    """

    x: float
    left: ChainSectorEig
    right: ChainSectorEig
    sector_indices: np.ndarray = field(repr=False)

    @property
    def dim(self):
        return self.left.dim * self.right.dim

    @property
    def product_energies(self):
        return np.add.outer(self.right.energies, self.left.energies).ravel()

    def product_state_block(self, a, b):
        """Amplitudes of product eigenstate (a, b) in block coordinates."""
        return np.kron(self.right.vectors[:, b], self.left.vectors[:, a])

    def rotate_to_products(self, block_matrix_cols):
        """Rotate column vectors given in block coordinates to product labels."""
        dl, dr = self.left.dim, self.right.dim
        t = block_matrix_cols.reshape(dr, dl, -1)
        t = np.tensordot(self.right.vectors, t, axes=([0], [0]))
        t = np.tensordot(self.left.vectors, t.transpose(1, 0, 2), axes=([0], [0]))
        # t[a, b, k] -> product label p = b * dl + a
        return t.transpose(1, 0, 2).reshape(dr * dl, -1)


@dataclass
class ChainFactorizedBasis:
    """Complete H0 eigenbasis as products of single-chain eigenstates."""

    config: LadderConfig
    blocks: dict = field(repr=False)

    def block(self, x) -> ChainBlock:
        key = float(x)
        if key not in self.blocks:
            raise KeyError(f"no magnetization-difference block {x}")
        return self.blocks[key]

    @property
    def x_values(self):
        return sorted(self.blocks)

    def h0_energies(self):
        """All product energies, sector-wide, unsorted by default order of blocks."""
        return np.concatenate([self.blocks[x].product_energies for x in self.x_values])


def chain_factorize_h0(config: LadderConfig, basis: SectorBasis | None = None) -> ChainFactorizedBasis:
    """Diagonalize H0 exactly via its tensor-product chain structure.

    Both beams carry the identical chain Hamiltonian, so each up-count
    sector is solved once and shared between the left and right factors.
    """
    if config.rungs > 16:
        raise ValueError("chain factorization supports at most 16 rungs")
    if basis is None:
        from .ladder import build_basis

        basis = build_basis(config)
    chain_eigs = {}

    def chain(n):
        if n not in chain_eigs:
            states, dense = chain_xxz_dense(config.rungs, n, config)
            w, u = scipy.linalg.eigh(dense)
            chain_eigs[n] = ChainSectorEig(n_up=n, states=states, energies=w, vectors=u)
        return chain_eigs[n]

    blocks = {}
    for proj in build_projectors(basis):
        n_l = round(basis.n_up / 2 + proj.x)
        n_r = basis.n_up - n_l
        blk = ChainBlock(
            x=proj.x, left=chain(n_l), right=chain(n_r), sector_indices=proj.indices
        )
        if blk.dim != proj.dim:
            raise AssertionError("chain block dimension mismatch against sector partition")
        blocks[float(proj.x)] = blk
    return ChainFactorizedBasis(config=config, blocks=blocks)


@dataclass
class RotatedBlock:
    """Inter-block coupling matrix in the H0 eigenbasis, with energy labels."""

    x_from: float
    x_to: float
    matrix: np.ndarray = field(repr=False)
    row_energies: np.ndarray = field(repr=False)
    col_energies: np.ndarray = field(repr=False)

    @property
    def shape(self):
        return self.matrix.shape

    def frobenius_sq(self):
        return float(np.sum(self.matrix ** 2))


def dirac_rotate_v_block(cfb: ChainFactorizedBasis, v: SparseOperator,
                         x_from, x_to) -> RotatedBlock:
    """Matrix elements <n in x_to| V |m in x_from> in the H0 eigenbasis.

    Only neighboring blocks couple; anything else is refused since the block
    is identically zero. The rotation contracts the four chain-eigenvector
    legs one at a time, so the largest intermediate stays at the size of the
    block itself.
    """
    if abs(x_to - x_from) != 1:
        raise ValueError(
            f"block ({x_to}, {x_from}) is identically zero: only |dX| = 1 couples"
        )
    src = cfb.block(x_from)
    dst = cfb.block(x_to)
    sub = v.to_scipy()[dst.sector_indices][:, src.sector_indices].toarray()
    # reshape to (right_to, left_to, right_from, left_from)
    t = sub.reshape(dst.right.dim, dst.left.dim, src.right.dim, src.left.dim)
    t = np.tensordot(dst.right.vectors, t, axes=([0], [0]))        # (b, lT, rF, lF)
    t = np.tensordot(dst.left.vectors, t, axes=([0], [1]))         # (a, b, rF, lF)
    t = np.tensordot(t, src.right.vectors, axes=([2], [0]))        # (a, b, lF, c)
    t = np.tensordot(t, src.left.vectors, axes=([2], [0]))         # (a, b, c, m)
    mat = t.transpose(1, 0, 2, 3).reshape(dst.dim, src.dim)
    return RotatedBlock(
        x_from=float(x_from),
        x_to=float(x_to),
        matrix=np.ascontiguousarray(mat),
        row_energies=dst.product_energies,
        col_energies=src.product_energies,
    )
