import numpy as np
import pytest
import scipy.sparse

from spinfpe import kernels
from spinfpe.kernels import (_sector_states_py, _xxz_assemble_py, popcount,
                             sector_states, segment_abs2, weighted_cos_series,
                             xxz_assemble, csr_matvec)


class TestSectorStates:
    @pytest.mark.parametrize("n,k", [(4, 2), (8, 4), (16, 8), (10, 3), (6, 0), (6, 6)])
    def test_paths_agree(self, n, k):
        np.testing.assert_array_equal(sector_states(n, k), _sector_states_py(n, k))

    def test_count_and_order(self):
        from math import comb

        states = sector_states(12, 5)
        assert states.shape[0] == comb(12, 5)
        assert np.all(np.diff(states) > 0)
        assert np.all(popcount(states) == 5)


class TestXxzAssemble:
    def test_paths_agree(self):
        states = sector_states(8, 4)
        a = np.array([0, 1, 2, 0])
        b = np.array([1, 2, 3, 4])
        flip = np.array([0.5, 0.5, 0.3, 1.0])
        zz = np.array([0.15, 0.15, 0.1, 0.2])
        d1, r1, c1, v1 = xxz_assemble(states, a, b, flip, zz)
        d2, r2, c2, v2 = _xxz_assemble_py(states, a, b, flip, zz)
        np.testing.assert_allclose(d1, d2, atol=1e-15)
        m1 = scipy.sparse.coo_matrix((v1, (r1, c1)), shape=(len(states),) * 2).toarray()
        m2 = scipy.sparse.coo_matrix((v2, (r2, c2)), shape=(len(states),) * 2).toarray()
        np.testing.assert_allclose(m1, m2, atol=1e-15)


class TestCsrMatvec:
    def test_against_scipy(self):
        rng = np.random.default_rng(0)
        mat = scipy.sparse.random(300, 300, density=0.05, random_state=1, format="csr")
        mat = mat + mat.T
        x = rng.normal(size=300) + 1j * rng.normal(size=300)
        got = csr_matvec(mat.indptr.astype(np.int64), mat.indices.astype(np.int64),
                         mat.data, x)
        np.testing.assert_allclose(got, mat @ x, atol=1e-12)

    def test_real_input(self):
        mat = scipy.sparse.random(100, 100, density=0.1, random_state=2, format="csr")
        x = np.arange(100, dtype=np.float64)
        got = csr_matvec(mat.indptr.astype(np.int64), mat.indices.astype(np.int64),
                         mat.data, x)
        np.testing.assert_allclose(got, mat @ x, atol=1e-12)


class TestSegmentAbs2:
    def test_against_direct_sum(self):
        rng = np.random.default_rng(3)
        psi = rng.normal(size=50) + 1j * rng.normal(size=50)
        perm = rng.permutation(50)
        offsets = np.array([0, 7, 7, 20, 50])
        got = segment_abs2(psi, perm, offsets)
        expected = [np.sum(np.abs(psi[perm[o1:o2]]) ** 2)
                    for o1, o2 in zip(offsets[:-1], offsets[1:])]
        np.testing.assert_allclose(got, expected, atol=1e-13)
        assert got[1] == 0.0  # empty segment

    def test_total_is_norm(self):
        rng = np.random.default_rng(4)
        psi = rng.normal(size=64) + 1j * rng.normal(size=64)
        perm = np.arange(64)
        offsets = np.array([0, 10, 64])
        got = segment_abs2(psi, perm, offsets)
        assert got.sum() == pytest.approx(np.linalg.norm(psi) ** 2, rel=1e-12)


class TestWeightedCosSeries:
    def test_against_double_loop(self):
        rng = np.random.default_rng(5)
        e_row = rng.normal(size=17)
        e_col = rng.normal(size=23)
        w = rng.normal(size=(17, 23)) ** 2
        times = np.linspace(0.0, 5.0, 40)
        got = weighted_cos_series(e_row, e_col, w, times, block=7)
        expected = np.array([
            np.sum(w * np.cos(np.subtract.outer(e_row, e_col) * t)) for t in times
        ])
        np.testing.assert_allclose(got, expected, rtol=1e-10, atol=1e-10)

    def test_initial_value_is_total_weight(self):
        rng = np.random.default_rng(6)
        w = rng.normal(size=(5, 8)) ** 2
        got = weighted_cos_series(rng.normal(size=5), rng.normal(size=8), w,
                                  np.array([0.0]))
        assert got[0] == pytest.approx(w.sum(), rel=1e-12)


def test_numba_flag_exposed():
    assert isinstance(kernels.USING_NUMBA, bool)
