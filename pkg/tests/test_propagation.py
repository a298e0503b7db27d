import numpy as np
import pytest

from spinfpe import ladder, propagation, spectral


@pytest.fixture(scope="module")
def setup_l4():
    cfg = ladder.LadderConfig(rungs=4)
    basis = ladder.build_basis(cfg)
    h = ladder.build_hamiltonian(basis, cfg)
    spec = spectral.diagonalize_dense(h, basis=basis)
    return cfg, basis, h, spec


def dense_propagate(spec, psi, t):
    u = spec.vectors()
    return u @ (np.exp(-1j * spec.eigenvalues * t) * (u.T @ psi))


class TestPropagate:
    def test_eigenstate_acquires_pure_phase(self, setup_l4):
        _, _, h, spec = setup_l4
        n = 12
        psi = spec.vector(n).astype(complex)
        out = propagation.propagate(psi, h, dt=0.7)
        expected = np.exp(-1j * spec.eigenvalues[n] * 0.7) * psi
        fidelity = abs(np.vdot(expected, out))
        assert fidelity == pytest.approx(1.0, abs=1e-10)

    def test_matches_dense_spectral_over_long_run(self, setup_l4):
        """Krylov vs dense spectral propagation at dim 70, t in [0, 150]."""
        _, basis, h, spec = setup_l4
        rng = np.random.default_rng(42)
        psi0 = rng.normal(size=basis.dim) + 1j * rng.normal(size=basis.dim)
        psi0 /= np.linalg.norm(psi0)
        psi = psi0.copy()
        t = 0.0
        for t_next in np.arange(5.0, 150.1, 5.0):
            while t < t_next - 1e-9:
                psi = propagation.propagate(psi, h, dt=0.1, tol=1e-9)
                t += 0.1
            exact = dense_propagate(spec, psi0, t)
            assert np.linalg.norm(psi - exact) < 1e-8

    def test_norm_drift_300_steps(self, setup_l4):
        _, basis, h, _ = setup_l4
        rng = np.random.default_rng(1)
        psi = rng.normal(size=basis.dim) + 1j * rng.normal(size=basis.dim)
        psi /= np.linalg.norm(psi)
        for _ in range(300):
            psi = propagation.propagate(psi, h, dt=0.1)
        assert abs(np.linalg.norm(psi) - 1.0) < 1e-9

    def test_energy_conservation(self, setup_l4):
        _, basis, h, _ = setup_l4
        rng = np.random.default_rng(2)
        psi = rng.normal(size=basis.dim) + 1j * rng.normal(size=basis.dim)
        psi /= np.linalg.norm(psi)
        e0 = np.vdot(psi, h.apply(psi)).real
        for _ in range(100):
            psi = propagation.propagate(psi, h, dt=0.5)
        e1 = np.vdot(psi, h.apply(psi)).real
        assert abs(e1 - e0) < 1e-8 * max(1.0, abs(e0))

    def test_parameter_validation(self, setup_l4):
        _, basis, h, _ = setup_l4
        psi = np.zeros(basis.dim, dtype=complex)
        psi[0] = 1.0
        with pytest.raises(ValueError):
            propagation.propagate(psi, h, dt=-0.1)
        with pytest.raises(ValueError):
            propagation.propagate(psi, h, dt=0.1, tol=1e-3)


class TestEvolveSeries:
    def test_point_support_initial_conditions(self, setup_l4):
        _, basis, h, _ = setup_l4
        projs = ladder.build_projectors(basis)
        # state fully inside X = 1
        target = [p for p in projs if p.x == 1.0][0]
        psi = np.zeros(basis.dim, dtype=complex)
        psi[target.indices[:3]] = np.array([0.6, 0.8j, 0.0])[:3]
        psi /= np.linalg.norm(psi)
        ens = propagation.MixedEnsemble.pure(psi)
        series = propagation.evolve_series(ens, h, projs, np.array([0.0, 1.0]))
        k = int(np.nonzero(series.x_values == 1.0)[0][0])
        assert series.probabilities[0, k] == pytest.approx(1.0, abs=1e-12)
        assert series.mean()[0] == pytest.approx(1.0, abs=1e-12)
        assert series.variance()[0] == pytest.approx(0.0, abs=1e-12)

    def test_grid_validation(self, setup_l4):
        _, basis, h, _ = setup_l4
        projs = ladder.build_projectors(basis)
        psi = np.zeros(basis.dim, dtype=complex)
        psi[0] = 1.0
        ens = propagation.MixedEnsemble.pure(psi)
        with pytest.raises(ValueError, match="increasing"):
            propagation.evolve_series(ens, h, projs, np.array([0.0, 2.0, 1.0]))

    def test_linearity_two_decompositions(self):
        cfg = ladder.LadderConfig(rungs=3)
        basis = ladder.build_basis(cfg)
        h = ladder.build_hamiltonian(basis, cfg)
        projs = ladder.build_projectors(basis)
        rng = np.random.default_rng(5)
        a = rng.normal(size=basis.dim) + 1j * rng.normal(size=basis.dim)
        a /= np.linalg.norm(a)
        b = rng.normal(size=basis.dim) + 1j * rng.normal(size=basis.dim)
        b -= np.vdot(a, b) * a
        b /= np.linalg.norm(b)
        plus = (a + b) / np.sqrt(2)
        minus = (a - b) / np.sqrt(2)
        times = np.linspace(0.0, 10.0, 11)
        e1 = propagation.MixedEnsemble(np.array([0.5, 0.5]), np.stack([a, b], axis=1))
        e2 = propagation.MixedEnsemble(np.array([0.5, 0.5]), np.stack([plus, minus], axis=1))
        s1 = propagation.evolve_series(e1, h, projs, times)
        s2 = propagation.evolve_series(e2, h, projs, times)
        assert np.abs(s1.probabilities - s2.probabilities).max() < 1e-8

    def test_long_time_mean_relaxes_to_zero(self, setup_l4):
        _, basis, h, spec = setup_l4
        projs = ladder.build_projectors(basis)
        rng = np.random.default_rng(8)
        psi = rng.normal(size=basis.dim) + 1j * rng.normal(size=basis.dim)
        psi /= np.linalg.norm(psi)
        ens = propagation.MixedEnsemble.pure(psi)
        times = np.linspace(500.0, 1000.0, 51)
        series = propagation.evolve_series(ens, h, projs, times)
        assert abs(series.mean().mean()) < 0.05

    def test_window_rep_matches_member_evolution(self):
        """The exact window-block path must agree with per-member propagation."""
        from spinfpe import states

        cfg = ladder.LadderConfig(rungs=3)
        basis = ladder.build_basis(cfg)
        h = ladder.build_hamiltonian(basis, cfg)
        projs = ladder.build_projectors(basis)
        spec = spectral.diagonalize_dense(h, basis=basis)
        sspec = states.InitialStateSpec(
            kind="window_mixed", x=0.5, window_center=0.0, window_width=2.0, mode="exact"
        )
        ens = states.window_mixed_state(sspec, basis, spec, projs)
        assert ens.window_rep is not None
        times = np.linspace(0.0, 20.0, 21)
        fast = propagation.evolve_series(ens, h, projs, times)
        member_ens = propagation.MixedEnsemble(ens.weights, ens.vectors)
        slow = propagation.evolve_series(member_ens, h, projs, times)
        assert np.abs(fast.probabilities - slow.probabilities).max() < 1e-10


class TestDiagonalEnsemble:
    def test_identity(self, setup_l4):
        _, basis, h, spec = setup_l4
        psi = np.zeros(basis.dim, dtype=complex)
        psi[3] = 1.0
        ens = propagation.MixedEnsemble.pure(psi)
        ident = ladder.SparseOperator.diagonal(np.ones(basis.dim))
        assert propagation.diagonal_ensemble(spec, ens, ident) == pytest.approx(1.0, abs=1e-10)

    def test_eigenstate_input(self, setup_l4):
        _, basis, h, spec = setup_l4
        x_op = ladder.build_x_observable(basis)
        x2 = ladder.SparseOperator.diagonal(basis.x_values() ** 2)
        n = 7
        ens = propagation.MixedEnsemble.pure(spec.vector(n).astype(complex))
        u = spec.vector(n)
        expected = float((basis.x_values() ** 2) @ (u * u))
        assert propagation.diagonal_ensemble(spec, ens, x2) == pytest.approx(expected, abs=1e-10)

    def test_matches_long_time_average_of_x_squared(self, setup_l4):
        _, basis, h, spec = setup_l4
        projs = ladder.build_projectors(basis)
        rng = np.random.default_rng(13)
        psi = rng.normal(size=basis.dim) + 1j * rng.normal(size=basis.dim)
        psi /= np.linalg.norm(psi)
        ens = propagation.MixedEnsemble.pure(psi)
        x2 = ladder.SparseOperator.diagonal(basis.x_values() ** 2)
        de = propagation.diagonal_ensemble(spec, ens, x2)
        times = np.linspace(500.0, 1000.0, 201)
        series = propagation.evolve_series(ens, h, projs, times)
        tavg = series.second_moment().mean()
        assert de == pytest.approx(tavg, rel=0.05)
