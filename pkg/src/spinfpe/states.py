"""Initial-state construction: window-filtered mixed states and random pure states.

Randomness is pinned to numpy's PCG64 bit generator: every draw uses
``Generator(PCG64(SeedSequence(entropy=seed, spawn_key=(stream,))))``, so a
(seed, stream) pair fully determines the state on a given numpy build.
Haar sampling means normalized i.i.d. standard complex Gaussians.
"""

from dataclasses import dataclass
from math import comb

import numpy as np
import scipy.linalg

from . import kernels
from .ladder import SectorBasis, XProjector
from .propagation import MixedEnsemble, WindowMixedRep
from .spectral import SpectralDecomposition, window_projector

EXACT_RANK_DEFAULT = 4000
_RANK_CUT = 1e-12

KINDS = ("window_mixed", "product_random", "entangled_random")
ORDERS = ("wxw", "xwx")
MODES = ("auto", "exact", "typicality")


@dataclass(frozen=True)
class InitialStateSpec:
    """Declarative description of one initial state."""

    kind: str = "window_mixed"
    x: float = 1.0
    window_center: float = 0.0
    window_width: float = 2.0
    seed: int = 20220
    samples: int = 10
    mode: str = "auto"
    order: str = "wxw"
    left_up: int | None = None
    right_up: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown state kind {self.kind!r}")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.order not in ORDERS:
            raise ValueError(f"unknown operator order {self.order!r}")


def rng_stream(seed, stream=0):
    """The pinned generator for (seed, stream); see module docstring."""
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(stream,)))
    )


def haar_vector(dim, rng):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def _projector_for(projectors, x):
    for p in projectors:
        if p.x == x:
            return p
    raise ValueError(f"no magnetization-difference subspace X = {x}")


def window_mixed_state(state_spec: InitialStateSpec, basis: SectorBasis,
                       spec: SpectralDecomposition, projectors,
                       exact_rank_ceiling=EXACT_RANK_DEFAULT) -> MixedEnsemble:
    """Mixed state filtered through an energy window around a target X.

    Default operator order ``wxw`` is the literal window-X-window sandwich;
    ``xwx`` is the X-supported variant (exactly zero initial variance).

    Exact mode spectrally decomposes the filtered operator (chosen
    automatically when the window rank is at most ``exact_rank_ceiling``).
    Typicality mode draws ``samples`` Haar sector vectors, pushes each
    through the two projector filters, and weights by squared filtered norm,
    which makes the ensemble average an unbiased estimate of the filtered
    operator; expectation values converge to the exact ones as samples grow.
    """
    win = window_projector(spec, state_spec.window_center, state_spec.window_width)
    if win.rank == 0:
        raise ValueError(
            f"energy window ({state_spec.window_center}, {state_spec.window_width}) "
            "contains no eigenstates"
        )
    proj = _projector_for(projectors, state_spec.x)
    mode = state_spec.mode
    if mode == "auto":
        mode = "exact" if win.rank <= exact_rank_ceiling else "typicality"
    if mode == "exact":
        return _window_mixed_exact(state_spec, basis, spec, win, proj)
    return _window_mixed_typicality(state_spec, basis, spec, win, proj)


def _window_mixed_exact(state_spec, basis, spec, win, proj):
    w_block = spec.vectors(win.eigen_indices)
    energies = spec.eigenvalues[win.eigen_indices]
    wx = w_block[proj.indices, :]
    if state_spec.order == "wxw":
        m = wx.T @ wx
        z = float(np.trace(m))
        if z <= 1e-14:
            raise ValueError("window and X subspace have numerically empty overlap")
        lam, u = scipy.linalg.eigh(m)
        keep = lam > _RANK_CUT * lam[-1]
        if not np.any(keep):
            raise ValueError("filtered operator has numerically zero rank")
        weights = lam[keep] / lam[keep].sum()
        vectors = w_block @ u[:, keep]
        rep = WindowMixedRep(energies=energies, vectors=w_block, m_matrix=m, trace=z)
        return MixedEnsemble(weights=weights, vectors=vectors, window_rep=rep)
    # X-supported variant: rho ~ P_X P_w P_X
    g = wx @ wx.T
    z = float(np.trace(g))
    if z <= 1e-14:
        raise ValueError("window and X subspace have numerically empty overlap")
    lam, u = scipy.linalg.eigh(g)
    keep = lam > _RANK_CUT * lam[-1]
    weights = lam[keep] / lam[keep].sum()
    vectors = np.zeros((basis.dim, int(keep.sum())))
    vectors[proj.indices, :] = u[:, keep]
    return MixedEnsemble(weights=weights, vectors=vectors)


def _window_mixed_typicality(state_spec, basis, spec, win, proj):
    w_block = spec.vectors(win.eigen_indices)

    def apply_window(v):
        return w_block @ (w_block.T.conj() @ v) if np.iscomplexobj(v) else w_block @ (w_block.T @ v)

    def apply_x(v):
        out = np.zeros_like(v)
        out[proj.indices] = v[proj.indices]
        return out

    vectors = np.empty((basis.dim, state_spec.samples), dtype=np.complex128)
    sq_norms = np.empty(state_spec.samples)
    for k in range(state_spec.samples):
        rng = rng_stream(state_spec.seed, stream=k)
        g = rng.normal(size=basis.dim) + 1j * rng.normal(size=basis.dim)
        if state_spec.order == "wxw":
            u = apply_window(apply_x(g))
        else:
            u = apply_x(apply_window(g))
        n2 = float(np.real(np.vdot(u, u)))
        if n2 <= 1e-28:
            raise ValueError("typicality sample annihilated by the filters")
        vectors[:, k] = u / np.sqrt(n2)
        sq_norms[k] = n2
    weights = sq_norms / sq_norms.sum()
    return MixedEnsemble(weights=weights, vectors=vectors)


def random_product_state(seed, left_up, right_up, basis: SectorBasis):
    """Haar-random left-chain state times Haar-random right-chain state.

    The factors live in fixed up-count chain sectors, so the product is
    exactly supported in one magnetization-difference subspace.
    """
    L = basis.rungs
    if left_up + right_up != basis.n_up:
        raise ValueError(
            f"left_up + right_up must equal the sector up count {basis.n_up}, "
            f"got {left_up} + {right_up}"
        )
    if not (0 <= left_up <= L and 0 <= right_up <= L):
        raise ValueError("beam up counts must lie in [0, rungs]")
    dim_l = comb(L, left_up)
    dim_r = comb(L, right_up)
    rng = rng_stream(seed)
    a = haar_vector(dim_l, rng)
    b = haar_vector(dim_r, rng)
    x = (left_up - right_up) / 2.0
    xvals = basis.x_values()
    idx = np.nonzero(xvals == x)[0]
    psi = np.zeros(basis.dim, dtype=np.complex128)
    psi[idx] = np.kron(b, a)
    return psi


def random_entangled_state(seed, x, basis: SectorBasis, projectors):
    """Haar-random state of the full X subspace (generically entangled)."""
    proj = _projector_for(projectors, x)
    if proj.dim <= 1:
        raise ValueError(f"subspace X = {x} is one dimensional; nothing to draw")
    rng = rng_stream(seed)
    psi = np.zeros(basis.dim, dtype=np.complex128)
    psi[proj.indices] = haar_vector(proj.dim, rng)
    return psi


def beam_cut_entropy_bits(state, basis: SectorBasis, x):
    """Entanglement entropy across the rung cut for an X-supported state."""
    xvals = basis.x_values()
    idx = np.nonzero(xvals == x)[0]
    block = np.asarray(state)[idx]
    outside = np.linalg.norm(np.delete(np.asarray(state), idx))
    if outside > 1e-10:
        raise ValueError("state is not supported in the given X subspace")
    n_l = round(basis.n_up / 2 + x)
    dim_l = comb(basis.rungs, n_l)
    dim_r = block.shape[0] // dim_l
    mat = block.reshape(dim_r, dim_l)
    s = scipy.linalg.svdvals(mat)
    p = s ** 2
    p = p[p > 1e-15]
    return float(-(p * np.log2(p)).sum())
