"""Unitary time evolution and observable time series.

Pure states propagate with a short-iterate Lanczos (Krylov) approximation of
exp(-iH dt), with adaptive subspace size, full reorthogonalization and
step splitting; below a configurable dimension a precomputed dense spectral
propagator is used instead. Mixed states evolve as weighted pure-state
ensembles, except for energy-window mixed states, which carry an exact
window-block representation that turns the whole time series into weighted
cosine sums over eigenpair frequencies.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import kernels
from .ladder import SparseOperator, partition_arrays

DENSE_PROPAGATION_DIM = 1500
INTERNAL_DT = 0.1


class PropagationError(RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


def _expm_tridiag_e1(alphas, betas, dt):
    """First column of exp(-i dt T) for the Lanczos tridiagonal T."""
    w, u = scipy.linalg.eigh_tridiagonal(alphas, betas)
    return u @ (np.exp(-1j * dt * w) * u[0])


def _krylov_step(apply_h, psi, dt, tol, m_max, depth=0):
    norm0 = np.linalg.norm(psi)
    if norm0 == 0.0:
        return psi
    d = psi.shape[0]
    m_cap = min(m_max, d)
    vs = np.empty((m_cap + 1, d), dtype=np.complex128)
    vs[0] = psi / norm0
    alphas = np.empty(m_cap)
    betas = np.empty(m_cap)
    u = None
    est = np.inf
    for j in range(m_cap):
        w = apply_h(vs[j])
        alphas[j] = np.vdot(vs[j], w).real
        w = w - alphas[j] * vs[j]
        if j > 0:
            w = w - betas[j - 1] * vs[j - 1]
        # full reorthogonalization keeps the basis clean over long runs
        coeffs = np.conj(vs[: j + 1] @ np.conj(w))
        w = w - vs[: j + 1].T @ coeffs
        b = np.linalg.norm(w)
        u_prev = u
        u = _expm_tridiag_e1(alphas[: j + 1], betas[:j], dt)
        est = b * abs(u[-1]) * abs(dt)
        if u_prev is not None:
            padded = np.zeros_like(u)
            padded[:-1] = u_prev
            est = max(est, np.linalg.norm(u - padded))
        if b < 1e-13 * (abs(alphas[j]) + 1.0):
            # invariant subspace: the Krylov result is exact
            return norm0 * (u @ vs[: j + 1])
        if est < tol:
            return norm0 * (u @ vs[: j + 1])
        betas[j] = b
        vs[j + 1] = w / b
    if depth >= 16:
        raise PropagationError(
            f"Krylov propagation did not reach tolerance {tol}; achieved residual {est}",
            residual=est,
        )
    half = _krylov_step(apply_h, psi, dt / 2, tol / 2, m_max, depth + 1)
    return _krylov_step(apply_h, half, dt / 2, tol / 2, m_max, depth + 1)


def propagate(state, h: SparseOperator, dt, tol=1e-9, m_max=40):
    """Apply exp(-i H dt) to a state with truncation error below ``tol``.

    hbar = 1 throughout; the returned amplitude vector is complex.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if not (0 < tol <= 1e-6):
        raise ValueError(f"tol must lie in (0, 1e-6], got {tol}")
    psi = np.asarray(state, dtype=np.complex128)
    return _krylov_step(h.apply, psi, dt, tol, m_max)


class Propagator:
    """Reusable stepping engine for one Hamiltonian.

    Uses exact dense spectral propagation below ``dense_dim`` and Krylov
    substepping (``internal_dt`` per substep) above it.
    """

    def __init__(self, h: SparseOperator, tol=1e-9, dense_dim=DENSE_PROPAGATION_DIM,
                 internal_dt=INTERNAL_DT, m_max=40):
        self.h = h
        self.tol = tol
        self.internal_dt = internal_dt
        self.m_max = m_max
        self._eig = None
        if h.dim <= dense_dim:
            w, u = scipy.linalg.eigh(h.to_dense())
            self._eig = (w, u)

    def advance(self, psi, dt):
        """Return exp(-i H dt) psi."""
        if dt == 0:
            return np.asarray(psi, dtype=np.complex128).copy()
        if self._eig is not None:
            w, u = self._eig
            return u @ (np.exp(-1j * w * dt) * (u.T @ psi))
        psi = np.asarray(psi, dtype=np.complex128)
        n_sub = max(1, int(np.ceil(dt / self.internal_dt - 1e-12)))
        sub = dt / n_sub
        for _ in range(n_sub):
            psi = _krylov_step(self.h.apply, psi, sub, self.tol, self.m_max)
        return psi


@dataclass
class MixedEnsemble:
    """Weighted collection of pure states standing in for a density operator."""

    weights: np.ndarray = field(repr=False)
    vectors: np.ndarray = field(repr=False)  # (dim, n_members)
    window_rep: "WindowMixedRep | None" = field(default=None, repr=False)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.min() <= 0:
            raise ValueError("ensemble weights must be positive")
        if abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("ensemble weights must sum to one")
        norms = np.linalg.norm(self.vectors, axis=0)
        if np.abs(norms - 1.0).max() > 1e-9:
            raise ValueError("ensemble members must be normalized")

    @classmethod
    def pure(cls, vector):
        vec = np.asarray(vector)
        return cls(weights=np.array([1.0]), vectors=vec[:, None])

    @property
    def dim(self):
        return self.vectors.shape[0]

    @property
    def n_members(self):
        return self.vectors.shape[1]

    def expectation_diagonal(self, diag_values):
        """Tr(rho A) for a diagonal observable."""
        probs = np.abs(self.vectors) ** 2
        return float(np.real((diag_values @ probs) @ self.weights))


@dataclass
class WindowMixedRep:
    """Exact window-block form of a window-filtered mixed state.

    The density operator is W (M / Z) W^T with W the window eigenvector
    block of the full Hamiltonian; all dynamics then stays inside the window
    and time-evolved subspace probabilities are weighted cosine sums.
    """

    energies: np.ndarray = field(repr=False)       # (r,)
    vectors: np.ndarray = field(repr=False)        # (dim, r)
    m_matrix: np.ndarray = field(repr=False)       # (r, r)
    trace: float = 0.0


@dataclass
class ObservableSeries:
    """Quantum P_X(t) plus derived mean and variance on a time grid."""

    times: np.ndarray = field(repr=False)
    x_values: np.ndarray = field(repr=False)
    probabilities: np.ndarray = field(repr=False)  # (n_times, n_subspaces)

    def __post_init__(self):
        sums = self.probabilities.sum(axis=1)
        if np.abs(sums - 1.0).max() > 1e-8:
            raise ValueError("subspace probabilities must sum to one (within 1e-8)")
        if self.probabilities.min() < -1e-10:
            raise ValueError("negative subspace probability")

    def mean(self):
        return self.probabilities @ self.x_values

    def second_moment(self):
        return self.probabilities @ self.x_values ** 2

    def variance(self):
        var = self.second_moment() - self.mean() ** 2
        return np.maximum(var, 0.0)


def _check_grid(times):
    times = np.asarray(times, dtype=np.float64)
    if times.ndim != 1 or times.shape[0] < 1:
        raise ValueError("time grid must be a non-empty 1d array")
    if np.any(np.diff(times) <= 0):
        raise ValueError("time grid must be strictly increasing")
    return times


def evolve_series(ensemble: MixedEnsemble, h: SparseOperator, projectors, times,
                  tol=1e-9, dense_dim=DENSE_PROPAGATION_DIM) -> ObservableSeries:
    """P_X(t), mean and variance for a (possibly mixed) initial state.

    Ensemble members evolve independently; their subspace probabilities are
    combined with the ensemble weights. Window-mixed states bypass member
    propagation entirely via their exact window-block representation.
    """
    times = _check_grid(times)
    if ensemble.window_rep is not None:
        return evolve_window_mixed(ensemble.window_rep, projectors, times)
    xs, perm, offsets = partition_arrays(projectors)
    probs = np.zeros((times.shape[0], xs.shape[0]))
    prop = Propagator(h, tol=tol, dense_dim=dense_dim)
    for r in range(ensemble.n_members):
        psi = np.asarray(ensemble.vectors[:, r], dtype=np.complex128)
        t_prev = 0.0
        for it, t in enumerate(times):
            try:
                if t > t_prev:
                    psi = prop.advance(psi, t - t_prev)
            except PropagationError as exc:
                raise PropagationError(
                    f"propagation failed at t = {t} (member {r}): {exc}",
                    residual=exc.residual,
                ) from exc
            t_prev = t
            probs[it] += ensemble.weights[r] * kernels.segment_abs2(psi, perm, offsets)
    return ObservableSeries(times=times, x_values=xs, probabilities=probs)


def evolve_window_mixed(rep: WindowMixedRep, projectors, times) -> ObservableSeries:
    """Exact series for a window-supported mixed state.

    P_Y(t) = (1/Z) sum_{n,m in window} (P_Y)_nm M_nm cos((E_n - E_m) t),
    evaluated per subspace with dense BLAS. Probability conservation is
    structural: the projector blocks sum to the identity on the window.
    """
    times = _check_grid(times)
    xs = np.array([p.x for p in projectors])
    probs = np.empty((times.shape[0], xs.shape[0]))
    for k, proj in enumerate(projectors):
        w_rows = rep.vectors[proj.indices, :]
        block = w_rows.T @ w_rows
        block *= rep.m_matrix
        probs[:, k] = kernels.weighted_cos_series(
            rep.energies, rep.energies, block, times
        ) / rep.trace
    return ObservableSeries(times=times, x_values=xs, probabilities=probs)


def diagonal_ensemble(spec, ensemble: MixedEnsemble, op, chunk=1024):
    """Dephased long-time prediction sum_n <n|A|n> sum_r w_r |<n|psi_r>|^2."""
    total = 0.0
    for lo in range(0, spec.dim, chunk):
        idx = np.arange(lo, min(lo + chunk, spec.dim))
        u = spec.vectors(idx)
        overlaps = u.T @ ensemble.vectors  # (chunk, n_members)
        pops = (np.abs(overlaps) ** 2) @ ensemble.weights
        if isinstance(op, SparseOperator):
            au = np.empty_like(u)
            for c in range(u.shape[1]):
                au[:, c] = op.apply(u[:, c]).real
        else:
            au = op @ u
        diag = np.einsum("sc,sc->c", u, au)
        total += float(diag @ pops)
    return total
