"""Naive stochastic model: birth-death rates, master equation, moments.

The magnetization difference lives on the integer lattice X = -N/4 .. N/4.
Mutual spin flips across a rung move X by one unit; assuming fast local
equilibration within each beam gives quadratic rates in X with a single
overall time-scale parameter gamma. The Kramers-Moyal drift and diffusion
coefficients of the continuum limit are exposed for evaluation only.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg


@dataclass(frozen=True)
class RateTable:
    """Up and down transition rates per magnetization difference."""

    n_sites: int
    gamma: float
    kappa: float
    x_values: np.ndarray = field(repr=False)
    up: np.ndarray = field(repr=False)
    down: np.ndarray = field(repr=False)

    @property
    def n_states(self):
        return self.x_values.shape[0]


def naive_rates(n_sites, gamma, kappa) -> RateTable:
    """Rates R(X -> X+-1) = (gamma kappa^2 N / 2) (1/2 -+ 2X/N)^2.

    Rates vanish automatically at the extreme magnetization differences.
    """
    if n_sites % 4 != 0:
        raise ValueError(f"site count must be divisible by 4, got {n_sites}")
    if gamma <= 0 or kappa <= 0:
        raise ValueError("gamma and kappa must be positive")
    xmax = n_sites // 4
    x = np.arange(-xmax, xmax + 1, dtype=np.float64)
    scale = gamma * kappa ** 2 * n_sites / 2.0
    up = scale * (0.5 - 2.0 * x / n_sites) ** 2
    down = scale * (0.5 + 2.0 * x / n_sites) ** 2
    return RateTable(n_sites=n_sites, gamma=gamma, kappa=kappa, x_values=x, up=up, down=down)


def master_generator(rates: RateTable) -> np.ndarray:
    """Tridiagonal generator over X; columns sum to zero."""
    k = rates.n_states
    gen = np.zeros((k, k))
    for i in range(k):
        if i + 1 < k:
            gen[i + 1, i] += rates.up[i]
        if i - 1 >= 0:
            gen[i - 1, i] += rates.down[i]
        gen[i, i] -= rates.up[i] + rates.down[i]
    return gen


def stationary_distribution(rates: RateTable) -> np.ndarray:
    """Detailed-balance stationary vector of the birth-death chain."""
    k = rates.n_states
    pi = np.ones(k)
    for i in range(k - 1):
        pi[i + 1] = pi[i] * rates.up[i] / rates.down[i + 1]
    return pi / pi.sum()


@dataclass
class DistributionSeries:
    """Probability vectors over X on a time grid, with derived moments."""

    times: np.ndarray = field(repr=False)
    x_values: np.ndarray = field(repr=False)
    probabilities: np.ndarray = field(repr=False)  # shape (n_times, n_states)

    def __post_init__(self):
        sums = self.probabilities.sum(axis=1)
        if np.abs(sums - 1.0).max() > 1e-12 * max(1.0, np.abs(sums).max()) + 1e-12:
            raise ValueError("probabilities must sum to one on every time slice")
        if self.probabilities.min() < -1e-12:
            raise ValueError("negative probability encountered")

    def mean(self):
        return self.probabilities @ self.x_values

    def second_moment(self):
        return self.probabilities @ self.x_values ** 2

    def variance(self):
        return self.second_moment() - self.mean() ** 2


def moments(series: DistributionSeries):
    """First moment and central second moment per time."""
    return series.mean(), series.variance()


def evolve_master(gen: np.ndarray, p0, times, x_values=None) -> "DistributionSeries":
    """Exact evolution p(t) = exp(t gen) p0 via the symmetrized spectral form.

    The generator satisfies detailed balance with respect to its stationary
    vector, so a similarity transform makes it symmetric and the evolution is
    a single dense eigensolve; no time-stepping error enters.
    """
    p0 = np.asarray(p0, dtype=np.float64)
    times = np.asarray(times, dtype=np.float64)
    k = gen.shape[0]
    if p0.shape != (k,):
        raise ValueError("initial distribution has wrong length")
    if np.abs(p0.sum() - 1.0) > 1e-12 or p0.min() < -1e-15:
        raise ValueError("p0 must be a probability vector")
    if x_values is None:
        x_values = np.arange(k, dtype=np.float64) - (k - 1) / 2.0

    # stationary vector from the null space; all components positive here
    w, u = scipy.linalg.eig(gen)
    pi = np.real(u[:, np.argmin(np.abs(w))])
    pi = pi / pi.sum()
    if pi.min() <= 0:
        raise ValueError("generator has no positive stationary vector")
    sq = np.sqrt(pi)
    sym = gen * (sq[None, :] / sq[:, None])
    if np.abs(sym - sym.T).max() > 1e-10 * max(1.0, np.abs(sym).max()):
        raise ValueError("generator does not satisfy detailed balance")
    ws, us = scipy.linalg.eigh((sym + sym.T) / 2.0)
    coeff = us.T @ (p0 / sq)
    phases = np.exp(np.outer(times, ws))
    probs = (phases * coeff[None, :]) @ us.T * sq[None, :]
    return DistributionSeries(times=times, x_values=np.asarray(x_values, dtype=np.float64),
                              probabilities=probs)


@dataclass(frozen=True)
class FpeCoefficients:
    """Drift potential and diffusion coefficient of the continuum expansion.

    Functions of the magnetization-difference density z = X/N. Only
    evaluation is provided; nothing here integrates the continuum equation.
    """

    gamma: float
    kappa: float
    n_sites: int

    def drift_potential(self, z):
        return self.gamma * self.kappa ** 2 * np.asarray(z) ** 2

    def diffusion(self, z):
        z = np.asarray(z)
        return self.gamma * self.kappa ** 2 * (0.25 + 4.0 * z ** 2) / self.n_sites


def fpe_coefficients(gamma, kappa, n_sites) -> FpeCoefficients:
    if gamma <= 0 or kappa <= 0 or n_sites <= 0:
        raise ValueError("parameters must be positive")
    return FpeCoefficients(gamma=gamma, kappa=kappa, n_sites=n_sites)
