"""Hot numeric kernels: numba-jitted loops with pure-numpy fallbacks.

The numba path is used whenever numba imports cleanly. Set the environment
variable ``SPINFPE_NO_NUMBA=1`` before import to force the numpy fallbacks
(useful for debugging and for the kernel benchmark in ``benchmarks/``).

Kernels here are deliberately free of package types: they take plain arrays
so the jitted signatures stay simple. Reductions run in a fixed order (or
row-parallel with serial inner loops), so results are reproducible run to
run on the same machine.
"""

import os

import numpy as np
import scipy.sparse

NUMBA_DISABLED = os.environ.get("SPINFPE_NO_NUMBA", "").strip() not in ("", "0")

if not NUMBA_DISABLED:
    try:
        from numba import njit

        USING_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        USING_NUMBA = False
else:
    USING_NUMBA = False


# --------------------------------------------------------------------------
# basis enumeration
# --------------------------------------------------------------------------

def _sector_states_py(n_sites, n_up):
    # vectorized filter; fine up to ~24 sites
    if n_up == 0:
        return np.zeros(1, dtype=np.int64)
    space = np.arange(1 << n_sites, dtype=np.uint64)
    states = space[np.bitwise_count(space) == n_up]
    return states.astype(np.int64)


if USING_NUMBA:

    @njit(cache=True, inline="always")
    def _trailing_zeros(x):
        n = 0
        while x & 1 == 0:
            x >>= 1
            n += 1
        return n

    @njit(cache=True)
    def _sector_states_nb(n_sites, n_up):
        # enumerate ascending via the next-bit-permutation trick
        size = 1
        for k in range(n_up):
            size = size * (n_sites - k) // (k + 1)
        out = np.empty(size, dtype=np.int64)
        if n_up == 0:
            out[0] = 0
            return out
        v = (np.int64(1) << n_up) - 1
        for i in range(size):
            out[i] = v
            t = v | (v - 1)
            v = (t + 1) | (((~t & -(~t)) - 1) >> (_trailing_zeros(v) + 1))
        return out

    def sector_states(n_sites, n_up):
        return _sector_states_nb(n_sites, n_up)

else:

    def sector_states(n_sites, n_up):
        return _sector_states_py(n_sites, n_up)


def popcount(x):
    """Per-element popcount of an integer array."""
    return np.bitwise_count(np.asarray(x, dtype=np.uint64)).astype(np.int64)


# --------------------------------------------------------------------------
# XXZ two-site term assembly over a fixed-magnetization basis
# --------------------------------------------------------------------------

def _xxz_assemble_py(states, sites_a, sites_b, flip_amp, zz_amp):
    d = states.shape[0]
    diag = np.zeros(d, dtype=np.float64)
    rows, cols, vals = [], [], []
    arange = np.arange(d, dtype=np.int64)
    for b in range(sites_a.shape[0]):
        mask = (np.int64(1) << int(sites_a[b])) | (np.int64(1) << int(sites_b[b]))
        two = np.bitwise_count((states & mask).astype(np.uint64))
        anti = two == 1
        diag += np.where(anti, -zz_amp[b], zz_amp[b])
        flipped = states[anti] ^ mask
        cols_b = np.searchsorted(states, flipped)
        rows.append(arange[anti])
        cols.append(cols_b.astype(np.int64))
        vals.append(np.full(cols_b.shape[0], flip_amp[b]))
    rows = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
    cols = np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64)
    vals = np.concatenate(vals) if vals else np.zeros(0, dtype=np.float64)
    return diag, rows, cols, vals


if USING_NUMBA:

    @njit(cache=True)
    def _xxz_assemble_nb(states, sites_a, sites_b, flip_amp, zz_amp):
        d = states.shape[0]
        nb = sites_a.shape[0]
        diag = np.zeros(d, dtype=np.float64)
        rows = np.empty(d * nb, dtype=np.int64)
        cols = np.empty(d * nb, dtype=np.int64)
        vals = np.empty(d * nb, dtype=np.float64)
        k = 0
        for i in range(d):
            s = states[i]
            for b in range(nb):
                mask = (np.int64(1) << sites_a[b]) | (np.int64(1) << sites_b[b])
                part = s & mask
                if part == 0 or part == mask:
                    diag[i] += zz_amp[b]
                else:
                    diag[i] -= zz_amp[b]
                    j = np.searchsorted(states, s ^ mask)
                    rows[k] = i
                    cols[k] = j
                    vals[k] = flip_amp[b]
                    k += 1
        return diag, rows[:k], cols[:k], vals[:k]

    def xxz_assemble(states, sites_a, sites_b, flip_amp, zz_amp):
        return _xxz_assemble_nb(
            states,
            np.asarray(sites_a, dtype=np.int64),
            np.asarray(sites_b, dtype=np.int64),
            np.asarray(flip_amp, dtype=np.float64),
            np.asarray(zz_amp, dtype=np.float64),
        )

else:

    def xxz_assemble(states, sites_a, sites_b, flip_amp, zz_amp):
        return _xxz_assemble_py(
            states,
            np.asarray(sites_a, dtype=np.int64),
            np.asarray(sites_b, dtype=np.int64),
            np.asarray(flip_amp, dtype=np.float64),
            np.asarray(zz_amp, dtype=np.float64),
        )


# --------------------------------------------------------------------------
# sparse matrix-vector product (CSR, real matrix, real or complex vector)
# --------------------------------------------------------------------------

if USING_NUMBA:

    # serial kernels: the matvecs here are a few hundred kFLOP, where thread
    # launch overhead (and contention with BLAS threads) costs more than it buys
    @njit(cache=True)
    def _csr_matvec_c16(indptr, indices, data, x):
        n = indptr.shape[0] - 1
        y = np.empty(n, dtype=np.complex128)
        for i in range(n):
            acc = 0.0 + 0.0j
            for k in range(indptr[i], indptr[i + 1]):
                acc += data[k] * x[indices[k]]
            y[i] = acc
        return y

    @njit(cache=True)
    def _csr_matvec_f8(indptr, indices, data, x):
        n = indptr.shape[0] - 1
        y = np.empty(n, dtype=np.float64)
        for i in range(n):
            acc = 0.0
            for k in range(indptr[i], indptr[i + 1]):
                acc += data[k] * x[indices[k]]
            y[i] = acc
        return y

    def csr_matvec(indptr, indices, data, x):
        if np.iscomplexobj(x):
            return _csr_matvec_c16(indptr, indices, data, np.ascontiguousarray(x))
        return _csr_matvec_f8(indptr, indices, data, np.ascontiguousarray(x))

else:

    def csr_matvec(indptr, indices, data, x):
        n = indptr.shape[0] - 1
        mat = scipy.sparse.csr_matrix((data, indices, indptr), shape=(n, n), copy=False)
        return mat @ x


# --------------------------------------------------------------------------
# segment sums of |psi|^2 (probability per index set)
# --------------------------------------------------------------------------

if USING_NUMBA:

    @njit(cache=True)
    def _segment_abs2_nb(re, im, perm, offsets):
        nseg = offsets.shape[0] - 1
        out = np.zeros(nseg, dtype=np.float64)
        for s in range(nseg):
            acc = 0.0
            for k in range(offsets[s], offsets[s + 1]):
                j = perm[k]
                acc += re[j] * re[j] + im[j] * im[j]
            out[s] = acc
        return out

    def segment_abs2(psi, perm, offsets):
        psi = np.asarray(psi)
        if np.iscomplexobj(psi):
            re = np.ascontiguousarray(psi.real)
            im = np.ascontiguousarray(psi.imag)
        else:
            re = np.ascontiguousarray(psi, dtype=np.float64)
            im = np.zeros_like(re)
        return _segment_abs2_nb(re, im, perm, offsets)

else:

    def segment_abs2(psi, perm, offsets):
        a2 = np.abs(np.asarray(psi)[perm]) ** 2
        nseg = offsets.shape[0] - 1
        out = np.zeros(nseg, dtype=np.float64)
        nonempty = offsets[:-1] < offsets[1:]
        if np.any(nonempty):
            sums = np.add.reduceat(a2, offsets[:-1][nonempty])
            out[nonempty] = sums
        return out


# --------------------------------------------------------------------------
# weighted cosine series: s(t) = sum_{n,m} W[n,m] cos((e_row[n]-e_col[m]) t)
# --------------------------------------------------------------------------

def weighted_cos_series(e_row, e_col, weights, times, block=256):
    """Evaluate ``sum_nm W[n,m] cos((e_row[n] - e_col[m]) * t)`` on a grid.

    Uses the factorization cos(a-b) = cos a cos b + sin a sin b, which turns
    the double frequency sum into two real matrix products per time block.
    This is BLAS-bound, so the same implementation serves both kernel modes.
    """
    e_row = np.asarray(e_row, dtype=np.float64)
    e_col = np.asarray(e_col, dtype=np.float64)
    times = np.asarray(times, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    out = np.empty(times.shape[0], dtype=np.float64)
    for lo in range(0, times.shape[0], block):
        t = times[lo:lo + block]
        ph_c = e_col[:, None] * t[None, :]
        cc = np.cos(ph_c)
        ss = np.sin(ph_c)
        wc = weights @ cc
        ws = weights @ ss
        ph_r = e_row[:, None] * t[None, :]
        out[lo:lo + t.shape[0]] = np.einsum("nt,nt->t", np.cos(ph_r), wc) + np.einsum(
            "nt,nt->t", np.sin(ph_r), ws
        )
    return out
