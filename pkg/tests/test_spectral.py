import numpy as np
import pytest
from math import comb

from spinfpe import ladder, spectral

import oracles


@pytest.fixture(scope="module")
def cfg3():
    return ladder.LadderConfig(rungs=3)


@pytest.fixture(scope="module")
def basis3(cfg3):
    return ladder.build_basis(cfg3)


@pytest.fixture(scope="module")
def spec3(cfg3, basis3):
    h = ladder.build_hamiltonian(basis3, cfg3)
    return spectral.diagonalize_dense(h, basis=basis3)


class TestDiagonalizeDense:
    def test_flip_flop_block_eigenvalues(self):
        block = np.array([[0.0, 0.5], [0.5, 0.0]])
        spec = spectral.diagonalize_dense(block)
        np.testing.assert_allclose(spec.eigenvalues, [-0.5, 0.5], atol=1e-14)

    def test_trace_identity(self, cfg3, basis3, spec3):
        h = ladder.build_hamiltonian(basis3, cfg3)
        assert spec3.eigenvalues.sum() == pytest.approx(np.trace(h.to_dense()), abs=1e-8)

    def test_eigenvalues_ascending(self, spec3):
        assert np.all(np.diff(spec3.eigenvalues) >= -1e-14)

    def test_spectrum_invariant_under_beam_swap(self, cfg3, basis3):
        h = ladder.build_hamiltonian(basis3, cfg3).to_dense()
        perm = basis3.swap_permutation()
        w1 = np.linalg.eigvalsh(h)
        w2 = np.linalg.eigvalsh(h[np.ix_(perm, perm)])
        np.testing.assert_allclose(w1, w2, atol=1e-10)

    def test_orthonormality(self, spec3, basis3):
        u = spec3.vectors()
        gram = u.T @ u
        assert np.abs(gram - np.eye(basis3.dim)).max() < 1e-10

    def test_reconstruction(self, cfg3, basis3, spec3):
        h = ladder.build_hamiltonian(basis3, cfg3)
        rng = np.random.default_rng(11)
        v = rng.normal(size=basis3.dim)
        u = spec3.vectors()
        rebuilt = u @ (spec3.eigenvalues * (u.T @ v))
        assert np.abs(rebuilt - h.apply(v)).max() < 1e-8

    def test_parity_resolved(self, spec3, basis3):
        perm = basis3.swap_permutation()
        u = spec3.vectors()
        swapped = u[perm]
        assert spec3.parity is not None
        for k in range(basis3.dim):
            assert np.abs(swapped[:, k] - spec3.parity[k] * u[:, k]).max() < 1e-8

    def test_parity_counts(self, spec3, basis3):
        # orbit counting: even block gains one dimension per swap-fixed state
        fixed = np.sum(basis3.swap_permutation() == np.arange(basis3.dim))
        n_even = np.sum(spec3.parity == 1)
        assert n_even == (basis3.dim - fixed) // 2 + fixed

    def test_x_diagonal_vanishes_for_parity_states(self, basis3, spec3):
        xdiag = basis3.x_values()
        vals = spec3.diagonal_expectations(xdiag)
        assert np.abs(vals).max() < 1e-12

    def test_dimension_budget_refusal(self, cfg3, basis3):
        h = ladder.build_hamiltonian(basis3, cfg3)
        with pytest.raises(spectral.DimensionBudgetError, match="window-free"):
            spectral.diagonalize_dense(h, basis=basis3, ceiling=10)

    def test_matches_plain_eigh(self, cfg3, basis3, spec3):
        h = ladder.build_hamiltonian(basis3, cfg3).to_dense()
        w = np.linalg.eigvalsh(h)
        np.testing.assert_allclose(spec3.eigenvalues, w, atol=1e-10)

    def test_subset_by_value(self, cfg3, basis3):
        h = ladder.build_hamiltonian(basis3, cfg3)
        full = spectral.diagonalize_dense(h, basis=basis3)
        sub = spectral.diagonalize_dense(h, basis=basis3, subset_by_value=(-1.0, 1.0))
        keep = (full.eigenvalues >= -1.0) & (full.eigenvalues <= 1.0)
        np.testing.assert_allclose(sub.eigenvalues, full.eigenvalues[keep], atol=1e-10)
        u = sub.vectors()
        assert np.abs(u.T @ u - np.eye(sub.dim)).max() < 1e-10


class TestWindowProjector:
    def test_full_spectrum_window(self, spec3, basis3):
        span = spec3.eigenvalues[-1] - spec3.eigenvalues[0]
        win = spectral.window_projector(spec3, 0.0, 4 * span + 1)
        assert win.rank == basis3.dim

    def test_disjoint_windows_orthogonal(self, spec3):
        w1 = spectral.window_projector(spec3, -2.0, 1.0)
        w2 = spectral.window_projector(spec3, 2.0, 1.0)
        assert not set(w1.eigen_indices) & set(w2.eigen_indices)

    def test_empty_window(self, spec3):
        win = spectral.window_projector(spec3, 1e6, 0.5)
        assert win.rank == 0

    def test_closed_edges(self):
        spec = spectral.diagonalize_dense(np.diag([-1.0, 0.0, 1.0]))
        win = spectral.window_projector(spec, 0.0, 2.0)
        assert win.rank == 3

    def test_invalid_width(self, spec3):
        with pytest.raises(ValueError):
            spectral.window_projector(spec3, 0.0, 0.0)


class TestChainFactorization:
    def test_largest_chain_sector_dimension(self, cfb16):
        dims = [cfb16.block(x).left.dim for x in cfb16.x_values]
        assert max(dims) == comb(8, 4) == 70

    def test_product_energies_match_dense_h0_l3(self, cfg3, basis3):
        cfb = spectral.chain_factorize_h0(cfg3, basis3)
        h0 = ladder.build_h0(basis3, cfg3)
        dense_spectrum = np.sort(np.linalg.eigvalsh(h0.to_dense()))
        np.testing.assert_allclose(
            np.sort(cfb.h0_energies()), dense_spectrum, atol=1e-10
        )

    def test_embedded_product_state_is_h0_eigenstate(self, cfg3, basis3):
        cfb = spectral.chain_factorize_h0(cfg3, basis3)
        h0 = ladder.build_h0(basis3, cfg3)
        # odd rung count at Sz=0 gives half-integer magnetization differences
        blk = cfb.block(0.5)
        for a, b in [(0, 0), (1, 2), (blk.left.dim - 1, blk.right.dim - 1)]:
            vec = np.zeros(basis3.dim)
            vec[blk.sector_indices] = blk.product_state_block(a, b)
            energy = blk.left.energies[a] + blk.right.energies[b]
            assert np.abs(h0.apply(vec) - energy * vec).max() < 1e-9
            p = blk.product_energies[b * blk.left.dim + a]
            assert p == pytest.approx(energy, abs=1e-12)

    def test_block_dims_multiply_to_partition_dims(self, cfb16, basis16):
        for proj in ladder.build_projectors(basis16):
            assert cfb16.block(proj.x).dim == proj.dim


class TestDiracRotation:
    def test_block_shape_n16(self, rot01_16):
        assert rot01_16.shape == (3136, 4900)

    def test_frobenius_invariance_n16(self, rot01_16, v16, basis16):
        x_of = basis16.x_values()
        rows = np.nonzero(x_of == 1.0)[0]
        cols = np.nonzero(x_of == 0.0)[0]
        sector_block = v16.to_scipy()[rows][:, cols]
        expected = np.sum(sector_block.data ** 2)
        assert rot01_16.frobenius_sq() == pytest.approx(expected, rel=1e-10)

    def test_refuses_distant_blocks(self, cfb16, v16):
        with pytest.raises(ValueError, match="identically zero"):
            spectral.dirac_rotate_v_block(cfb16, v16, 0, 2)

    def test_dense_change_of_basis_oracle_l2(self):
        cfg = ladder.LadderConfig(rungs=2)
        basis = ladder.build_basis(cfg)
        v = ladder.build_v(basis, cfg)
        cfb = spectral.chain_factorize_h0(cfg, basis)
        rot = spectral.dirac_rotate_v_block(cfb, v, 0, 1)

        h0_o, v_o, _, _ = oracles.sector_operators(2)
        w, u = np.linalg.eigh(h0_o)
        xvals = basis.x_values()
        rows = np.nonzero(xvals == 1.0)[0]
        cols = np.nonzero(xvals == 0.0)[0]
        # oracle eigenvectors ordered by energy; restrict to definite-X eigenstates
        x_of_eig = np.einsum("sn,s,sn->n", u, xvals, u)
        row_eig = np.nonzero(np.abs(x_of_eig - 1.0) < 1e-9)[0]
        col_eig = np.nonzero(np.abs(x_of_eig) < 1e-9)[0]
        block_o = u[:, row_eig].T @ v_o @ u[:, col_eig]
        e_rows = w[row_eig]
        e_cols = w[col_eig]

        # compare per energy-pair group (intra-degenerate rotations are free)
        def group_weights(mat, er, ec):
            out = {}
            for i in range(mat.shape[0]):
                for j in range(mat.shape[1]):
                    key = (round(er[i], 9), round(ec[j], 9))
                    out[key] = out.get(key, 0.0) + mat[i, j] ** 2
            return out

        g1 = group_weights(rot.matrix, rot.row_energies, rot.col_energies)
        g2 = group_weights(block_o, e_rows, e_cols)
        assert set(g1) == set(g2)
        for key, val in g1.items():
            assert val == pytest.approx(g2[key], abs=1e-12)
