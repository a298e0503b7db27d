import numpy as np
import pytest
from math import comb, log

from spinfpe import ladder, propagation, spectral, states


@pytest.fixture(scope="module")
def small_setup():
    cfg = ladder.LadderConfig(rungs=2)
    basis = ladder.build_basis(cfg)
    h = ladder.build_hamiltonian(basis, cfg)
    spec = spectral.diagonalize_dense(h, basis=basis)
    projs = ladder.build_projectors(basis)
    return cfg, basis, h, spec, projs


class TestWindowMixed:
    def test_exact_mode_trace_one(self, small_setup):
        _, basis, _, spec, projs = small_setup
        sspec = states.InitialStateSpec(x=0.0, window_width=3.0, mode="exact")
        ens = states.window_mixed_state(sspec, basis, spec, projs)
        assert ens.weights.sum() == pytest.approx(1.0, abs=1e-14)

    def test_full_spectrum_window_gives_maximally_mixed_x_block(self, small_setup):
        _, basis, h, spec, projs = small_setup
        span = spec.eigenvalues[-1] - spec.eigenvalues[0]
        sspec = states.InitialStateSpec(x=0.0, window_width=4 * span, mode="exact")
        ens = states.window_mixed_state(sspec, basis, spec, projs)
        d_x = [p for p in projs if p.x == 0.0][0].dim
        assert ens.n_members == d_x
        np.testing.assert_allclose(ens.weights, 1.0 / d_x, atol=1e-12)
        series = propagation.evolve_series(ens, h, projs, np.array([0.0, 0.5]))
        k = int(np.nonzero(series.x_values == 0.0)[0][0])
        assert series.probabilities[0, k] == pytest.approx(1.0, abs=1e-10)
        assert series.variance()[0] == pytest.approx(0.0, abs=1e-10)

    def test_xwx_order_exactly_x_supported(self, small_setup):
        _, basis, h, spec, projs = small_setup
        sspec = states.InitialStateSpec(x=0.0, window_width=2.0, mode="exact", order="xwx")
        ens = states.window_mixed_state(sspec, basis, spec, projs)
        xvals = basis.x_values()
        outside = np.abs(ens.vectors[xvals != 0.0, :])
        assert outside.max() == 0.0

    def test_wxw_literal_order_leaks_outside_x(self):
        # the literal sandwich does not commute with P_X, so narrow windows
        # leave a little weight in the neighbor subspaces
        cfg = ladder.LadderConfig(rungs=4)
        basis = ladder.build_basis(cfg)
        h = ladder.build_hamiltonian(basis, cfg)
        spec = spectral.diagonalize_dense(h, basis=basis)
        projs = ladder.build_projectors(basis)
        sspec = states.InitialStateSpec(x=1.0, window_width=2.0, mode="exact")
        ens = states.window_mixed_state(sspec, basis, spec, projs)
        series = propagation.evolve_series(ens, h, projs, np.array([0.0, 0.1]))
        k = int(np.nonzero(series.x_values == 1.0)[0][0])
        p0 = series.probabilities[0, k]
        assert 0.5 < p0 < 1.0

    def test_empty_window_rejected(self, small_setup):
        _, basis, _, spec, projs = small_setup
        sspec = states.InitialStateSpec(x=0.0, window_center=1e6, window_width=0.1)
        with pytest.raises(ValueError, match="no eigenstates"):
            states.window_mixed_state(sspec, basis, spec, projs)

    def test_zero_overlap_rejected(self, small_setup):
        _, basis, _, _, projs = small_setup
        # engineered diagonal operator: lone eigenstate in the window lives
        # in the X = 1 subspace, so filtering toward X = 0 annihilates it
        xvals = basis.x_values()
        diag = np.where(xvals == 1.0, 5.0, 0.0)
        spec = spectral.diagonalize_dense(np.diag(diag))
        sspec = states.InitialStateSpec(x=0.0, window_center=5.0, window_width=0.1, mode="exact")
        with pytest.raises(ValueError, match="empty overlap"):
            states.window_mixed_state(sspec, basis, spec, projs)

    def test_typicality_deterministic_per_seed(self, small_setup):
        _, basis, _, spec, projs = small_setup
        sspec = states.InitialStateSpec(x=0.0, window_width=3.0, mode="typicality",
                                        samples=4, seed=99)
        e1 = states.window_mixed_state(sspec, basis, spec, projs)
        e2 = states.window_mixed_state(sspec, basis, spec, projs)
        assert np.array_equal(e1.vectors, e2.vectors)
        assert np.array_equal(e1.weights, e2.weights)

    def test_typicality_converges_to_exact(self):
        """Standard-error scaling of the typicality estimator at 6 rungs."""
        cfg = ladder.LadderConfig(rungs=6)
        basis = ladder.build_basis(cfg)
        h = ladder.build_hamiltonian(basis, cfg)
        spec = spectral.diagonalize_dense(h, basis=basis)
        projs = ladder.build_projectors(basis)
        xdiag = basis.x_values()
        base = dict(x=1.0, window_center=0.0, window_width=2.0)
        exact = states.window_mixed_state(
            states.InitialStateSpec(mode="exact", **base), basis, spec, projs
        )
        target = exact.expectation_diagonal(xdiag)
        errs = {}
        for n_samples in (8, 128):
            devs = []
            for seed in range(6):
                ens = states.window_mixed_state(
                    states.InitialStateSpec(mode="typicality", samples=n_samples,
                                            seed=1000 + seed, **base),
                    basis, spec, projs,
                )
                devs.append(ens.expectation_diagonal(xdiag) - target)
            errs[n_samples] = np.sqrt(np.mean(np.square(devs)))
        # 16x the samples should cut the RMS error by about 4; allow slack
        assert errs[128] < errs[8]
        assert errs[128] < 0.6 * errs[8]
        assert errs[128] < 0.05


class TestRandomProduct:
    def test_five_three_split_observable(self, ):
        cfg = ladder.LadderConfig(rungs=8)
        basis = ladder.build_basis(cfg)
        psi = states.random_product_state(5, 5, 3, basis)
        xdiag = basis.x_values()
        probs = np.abs(psi) ** 2
        assert xdiag @ probs == pytest.approx(1.0, abs=1e-12)
        assert (xdiag ** 2) @ probs - (xdiag @ probs) ** 2 == pytest.approx(0.0, abs=1e-12)
        assert np.linalg.norm(psi) == pytest.approx(1.0, abs=1e-12)

    def test_product_state_unentangled(self):
        cfg = ladder.LadderConfig(rungs=8)
        basis = ladder.build_basis(cfg)
        psi = states.random_product_state(11, 5, 3, basis)
        assert states.beam_cut_entropy_bits(psi, basis, 1.0) == pytest.approx(0.0, abs=1e-10)

    def test_inconsistent_counts_rejected(self):
        cfg = ladder.LadderConfig(rungs=8)
        basis = ladder.build_basis(cfg)
        with pytest.raises(ValueError, match="up count"):
            states.random_product_state(0, 5, 4, basis)

    def test_haar_overlap_statistics(self):
        cfg = ladder.LadderConfig(rungs=8)
        basis = ladder.build_basis(cfg)
        overlaps = []
        for k in range(100):
            p1 = states.random_product_state(2 * k, 5, 3, basis)
            p2 = states.random_product_state(2 * k + 1, 5, 3, basis)
            overlaps.append(abs(np.vdot(p1, p2)) ** 2)
        mean = np.mean(overlaps)
        expected = 1.0 / (56 * 56)
        assert expected / 2 < mean < expected * 2

    def test_deterministic(self):
        cfg = ladder.LadderConfig(rungs=8)
        basis = ladder.build_basis(cfg)
        a = states.random_product_state(123, 5, 3, basis)
        b = states.random_product_state(123, 5, 3, basis)
        assert np.array_equal(a, b)


class TestRandomEntangled:
    def test_support_and_norm(self):
        cfg = ladder.LadderConfig(rungs=8)
        basis = ladder.build_basis(cfg)
        projs = ladder.build_projectors(basis)
        psi = states.random_entangled_state(7, 1.0, basis, projs)
        assert np.linalg.norm(psi) == pytest.approx(1.0, abs=1e-12)
        xdiag = basis.x_values()
        assert xdiag @ np.abs(psi) ** 2 == pytest.approx(1.0, abs=1e-12)

    def test_entropy_near_page_value(self):
        cfg = ladder.LadderConfig(rungs=8)
        basis = ladder.build_basis(cfg)
        projs = ladder.build_projectors(basis)
        ents = [
            states.beam_cut_entropy_bits(
                states.random_entangled_state(1000 + k, 1.0, basis, projs), basis, 1.0
            )
            for k in range(20)
        ]
        mean = np.mean(ents)
        assert mean > 1.0
        page = (log(56) - 0.5) / log(2)
        assert mean == pytest.approx(page, abs=0.1)

    def test_one_dimensional_subspace_rejected(self):
        cfg = ladder.LadderConfig(rungs=8)
        basis = ladder.build_basis(cfg)
        projs = ladder.build_projectors(basis)
        with pytest.raises(ValueError, match="one dimensional"):
            states.random_entangled_state(1, 4.0, basis, projs)
