"""Comparison metrics, coupling-block structure, and thermalization diagnostics."""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .ladder import SparseOperator
from .spectral import RotatedBlock, SpectralDecomposition

DELTA_HORIZON = 150.0


def _common_grid(series_a, series_b):
    ta, tb = np.asarray(series_a.times), np.asarray(series_b.times)
    if ta.shape != tb.shape or np.abs(ta - tb).max() > 1e-9:
        raise ValueError("series live on different time grids")
    return ta


def delta_metric(quantum_series, model_series, horizon=DELTA_HORIZON) -> float:
    """Time-averaged absolute mean deviation, integral |a_Q - a_model| / horizon.

    Both series must share a grid that covers [0, horizon].
    """
    times = _common_grid(quantum_series, model_series)
    if times[0] > 1e-9 or times[-1] < horizon - 1e-9:
        raise ValueError(f"time grid must cover [0, {horizon}]")
    sel = times <= horizon + 1e-9
    gap = np.abs(quantum_series.mean() - model_series.mean())[sel]
    return float(np.trapezoid(gap, times[sel]) / horizon)


@dataclass
class DeltaReport:
    """Deviation-from-model values per initial state, with class averages."""

    labels: list
    deltas: np.ndarray = field(repr=False)
    classes: list = field(default_factory=list)

    def __post_init__(self):
        if np.asarray(self.deltas).min() < 0:
            raise ValueError("delta values are nonnegative by construction")

    def class_average(self, cls):
        sel = [i for i, c in enumerate(self.classes) if c == cls]
        if not sel:
            raise KeyError(f"no states of class {cls!r}")
        return float(np.mean(np.asarray(self.deltas)[sel]))


@dataclass
class CompareReport:
    """Pointwise and sup deviations between a quantum and a stochastic run."""

    times: np.ndarray = field(repr=False)
    prob_deviation: np.ndarray = field(repr=False)   # (n_times, n_subspaces)
    mean_deviation: np.ndarray = field(repr=False)
    variance_deviation: np.ndarray = field(repr=False)
    sup_prob: float = 0.0
    sup_mean: float = 0.0
    sup_variance: float = 0.0


def compare_report(quantum_series, model_series) -> CompareReport:
    """Tabulated |P_X|, mean and variance deviations plus their sup norms."""
    times = _common_grid(quantum_series, model_series)
    if quantum_series.probabilities.shape != model_series.probabilities.shape:
        raise ValueError("series have different subspace counts")
    dp = np.abs(quantum_series.probabilities - model_series.probabilities)
    da = np.abs(quantum_series.mean() - model_series.mean())
    dv = np.abs(quantum_series.variance() - model_series.variance())
    return CompareReport(
        times=times, prob_deviation=dp, mean_deviation=da, variance_deviation=dv,
        sup_prob=float(dp.max()), sup_mean=float(da.max()), sup_variance=float(dv.max()),
    )


@dataclass
class BlockStructureReport:
    """Fine raw elements near zero energy plus coarse-grained |element|^2 grid."""

    fine_matrix: np.ndarray = field(repr=False)
    fine_row_energies: np.ndarray = field(repr=False)
    fine_col_energies: np.ndarray = field(repr=False)
    bin_width: float = 0.12
    row_bin_centers: np.ndarray = field(default=None, repr=False)
    col_bin_centers: np.ndarray = field(default=None, repr=False)
    mean_sq: np.ndarray = field(default=None, repr=False)     # (n_row_bins, n_col_bins)
    counts: np.ndarray = field(default=None, repr=False)

    def mean_sq_by_energy_distance(self, below=None, above=None):
        """Element-weighted mean |V|^2 over bins with |e_row - e_col| below/above a cut."""
        gap = np.abs(self.row_bin_centers[:, None] - self.col_bin_centers[None, :])
        if below is not None:
            mask = gap < below
        else:
            mask = gap > above
        mask &= self.counts > 0
        if not np.any(mask):
            return np.nan
        return float(
            (self.mean_sq[mask] * self.counts[mask]).sum() / self.counts[mask].sum()
        )


def _nearest_center(energies, size):
    order = np.argsort(np.abs(energies), kind="stable")[:size]
    chosen = np.sort(order)  # stable tie handling
    by_energy = chosen[np.argsort(energies[chosen], kind="stable")]
    return by_energy


def block_structure(block: RotatedBlock, fine_size=50, bin_width=0.12) -> BlockStructureReport:
    """Fine and coarse views of an inter-subspace coupling block.

    The fine part keeps the ``fine_size`` rows and columns whose energies sit
    closest to zero, reordered by energy. The coarse part averages squared
    elements over an energy grid of ``bin_width`` anchored at the spectrum
    minimum on each axis.
    """
    n_rows, n_cols = block.shape
    size_r, size_c = min(fine_size, n_rows), min(fine_size, n_cols)
    if size_r < fine_size or size_c < fine_size:
        warnings.warn(
            f"block {block.shape} smaller than requested fine size {fine_size}; shrinking"
        )
    rows = _nearest_center(block.row_energies, size_r)
    cols = _nearest_center(block.col_energies, size_c)
    fine = block.matrix[np.ix_(rows, cols)]

    def bins(energies):
        lo, hi = energies.min(), energies.max()
        n = max(1, int(np.ceil((hi - lo) / bin_width - 1e-12)))
        idx = np.minimum((energies - lo) / bin_width, n - 1 + 1e-9).astype(np.int64)
        idx = np.clip(idx, 0, n - 1)
        centers = lo + bin_width * (np.arange(n) + 0.5)
        return idx, centers

    row_idx, row_centers = bins(block.row_energies)
    col_idx, col_centers = bins(block.col_energies)
    sums = np.zeros((row_centers.shape[0], col_centers.shape[0]))
    counts = np.zeros_like(sums, dtype=np.int64)
    np.add.at(sums, (row_idx[:, None], col_idx[None, :]), block.matrix ** 2)
    np.add.at(counts, (row_idx[:, None], col_idx[None, :]), 1)
    mean_sq = np.divide(sums, counts, out=np.zeros_like(sums), where=counts > 0)
    return BlockStructureReport(
        fine_matrix=fine,
        fine_row_energies=block.row_energies[rows],
        fine_col_energies=block.col_energies[cols],
        bin_width=bin_width,
        row_bin_centers=row_centers,
        col_bin_centers=col_centers,
        mean_sq=mean_sq,
        counts=counts,
    )


@dataclass
class EthReport:
    """Diagonal matrix elements of the magnetization difference and its square."""

    energies: np.ndarray = field(repr=False)
    x_diagonal: np.ndarray = field(repr=False)
    x_squared_diagonal: np.ndarray = field(repr=False)
    parity: np.ndarray | None = field(default=None, repr=False)
    window_mean_x2: float = np.nan
    window_spread_x2: float = np.nan


def eth_diagonals(spec: SpectralDecomposition, x_op, window=None) -> EthReport:
    """<n|x|n> and <n|x^2|n> for eigenstates, summarized over an energy window.

    ``x_op`` may be the diagonal SparseOperator or its plain diagonal vector.
    The full lists are returned; the summary mean and spread cover the window
    (whole spectrum when no window is given).
    """
    if isinstance(x_op, SparseOperator):
        xdiag = np.zeros(x_op.dim)
        dense_idx = x_op.to_scipy().diagonal()
        xdiag[:] = dense_idx
    else:
        xdiag = np.asarray(x_op, dtype=np.float64)
    x_first = spec.diagonal_expectations(xdiag)
    x_second = spec.diagonal_expectations(xdiag ** 2)
    if window is not None:
        sel = window.eigen_indices
    else:
        sel = np.arange(spec.dim)
    vals = x_second[sel]
    return EthReport(
        energies=spec.eigenvalues,
        x_diagonal=x_first,
        x_squared_diagonal=x_second,
        parity=spec.parity,
        window_mean_x2=float(vals.mean()) if vals.size else np.nan,
        window_spread_x2=float(vals.max() - vals.min()) if vals.size else np.nan,
    )
