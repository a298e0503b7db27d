"""Command-line surface: run orchestration and CSV artifact generation.

Every subcommand validates its configuration, runs one pipeline, writes CSV
artifacts plus a manifest into the output directory, and exits 0 on
success, 1 on a validation problem, 2 on a numerical failure.
"""

import argparse
import sys

import numpy as np

from . import analysis, ladder, propagation, spectral, states, stochastic, tcl
from .runio import (ConfigError, RunConfig, RunWriter, format_number, parse_config,
                    write_csv, write_series_csv)

PAPER_GAMMA = 0.528  # reported time-scale constant for this model at 8 rungs

SUBCOMMANDS = (
    "info", "evolve-quantum", "evolve-stochastic", "tcl", "fit-gamma", "delta",
    "block-structure", "eth", "compare", "reproduce-figure",
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(1, f"{self.prog}: error: {message}\n")


class PipelineContext:
    """Lazily built shared artifacts for one configuration."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.ladder_cfg = config.ladder_config()
        self._cache = {}

    def _get(self, key, builder):
        if key not in self._cache:
            self._cache[key] = builder()
        return self._cache[key]

    @property
    def basis(self):
        return self._get("basis", lambda: ladder.build_basis(self.ladder_cfg))

    @property
    def hamiltonian(self):
        return self._get("h", lambda: ladder.build_hamiltonian(self.basis, self.ladder_cfg))

    @property
    def coupling(self):
        return self._get("v", lambda: ladder.build_v(self.basis, self.ladder_cfg))

    @property
    def projectors(self):
        return self._get("projs", lambda: ladder.build_projectors(self.basis))

    @property
    def chain_basis(self):
        return self._get("cfb", lambda: spectral.chain_factorize_h0(self.ladder_cfg, self.basis))

    @property
    def spectral_decomposition(self):
        return self._get(
            "spec",
            lambda: spectral.diagonalize_dense(
                self.hamiltonian, basis=self.basis, ceiling=self.config.dense_ceiling
            ),
        )

    def tcl_rate_map(self):
        def build():
            corrs = tcl.adjacent_correlations(
                self.chain_basis, self.coupling, self.config.correlation_times()
            )
            window = (self.config.plateau_lo, self.config.plateau_hi)
            return corrs, {k: tcl.tcl2_rates(c, plateau_window=window) for k, c in corrs.items()}
        return self._get("tcl_rates", build)

    def gamma(self):
        """The time-scale constant: supplied value or the TCL plateau fit."""
        if self.config.gamma != "fit":
            return float(self.config.gamma)

        def fit():
            _, rate_map = self.tcl_rate_map()
            result = tcl.fit_gamma(
                rate_map, self.config.kappa, self.ladder_cfg.n_sites,
                window=(self.config.plateau_lo, self.config.plateau_hi),
                on_irregular="drop",
            )
            return result.gamma
        return self._get("gamma_fit", fit)

    def initial_ensemble(self):
        cfg = self.config
        if cfg.state_kind == "window_mixed":
            sspec = states.InitialStateSpec(
                kind="window_mixed", x=cfg.state_x, window_center=cfg.window_center,
                window_width=cfg.window_width, seed=cfg.seed, samples=cfg.samples,
                mode=cfg.state_mode, order=cfg.window_order,
            )
            return states.window_mixed_state(
                sspec, self.basis, self.spectral_decomposition, self.projectors
            )
        if cfg.state_kind == "product_random":
            psi = states.random_product_state(cfg.seed, cfg.left_up, cfg.right_up, self.basis)
            return propagation.MixedEnsemble.pure(psi)
        psi = states.random_entangled_state(cfg.seed, cfg.state_x, self.basis, self.projectors)
        return propagation.MixedEnsemble.pure(psi)

    def quantum_series(self):
        def run():
            return propagation.evolve_series(
                self.initial_ensemble(), self.hamiltonian, self.projectors,
                self.config.output_times(),
            )
        return self._get("quantum_series", run)

    def stochastic_series(self, p0=None, gamma=None):
        gamma = self.gamma() if gamma is None else gamma
        rates = stochastic.naive_rates(self.ladder_cfg.n_sites, gamma, self.config.kappa)
        gen = stochastic.master_generator(rates)
        if p0 is None:
            p0 = np.zeros(rates.n_states)
            p0[np.nonzero(rates.x_values == self.config.state_x)[0][0]] = 1.0
        else:
            p0 = np.maximum(np.asarray(p0, dtype=np.float64), 0.0)
            p0 = p0 / p0.sum()
        return stochastic.evolve_master(gen, p0, self.config.output_times(),
                                        x_values=rates.x_values)


# --------------------------------------------------------------------------
# subcommand implementations
# --------------------------------------------------------------------------

def cmd_info(ctx: PipelineContext, writer: RunWriter, args):
    basis = ctx.basis
    projs = ctx.projectors
    print(f"sector dimension: {basis.dim}")
    print("X  d_X")
    rows = []
    for p in projs:
        print(f"{format_number(p.x):>4} {p.dim}")
        rows.append([p.x, p.dim])
    write_csv(writer.path("subspaces.csv"), ["x", "dimension"], rows)
    writer.note("sector_dimension", basis.dim)
    return 0


def cmd_evolve_quantum(ctx, writer, args):
    series = ctx.quantum_series()
    write_series_csv(writer.path("quantum_series.csv"), series)
    return 0


def cmd_evolve_stochastic(ctx, writer, args):
    gamma = ctx.gamma()
    writer.note("gamma_used", gamma)
    series = ctx.stochastic_series(gamma=gamma)
    write_series_csv(writer.path("stochastic_series.csv"), series)
    return 0


def _rates_csv_rows(rate_map, x_values, times):
    up_keys = [x for x in x_values[:-1]]
    down_keys = [x for x in x_values[1:]]
    header = (["t"]
              + [f"R_up_{format_number(x)}" for x in up_keys]
              + [f"R_down_{format_number(x)}" for x in down_keys])
    rows = []
    for i, t in enumerate(times):
        row = [t]
        for x in up_keys:
            row.append(rate_map[(x + 1, x)].values[i])
        for x in down_keys:
            row.append(rate_map[(x - 1, x)].values[i])
        rows.append(row)
    return header, rows


def cmd_tcl(ctx, writer, args):
    corrs, rate_map = ctx.tcl_rate_map()
    xs = np.array([p.x for p in ctx.projectors])
    times = ctx.config.correlation_times()
    header, rows = _rates_csv_rows(rate_map, xs, times)
    write_csv(writer.path("tcl_rates.csv"), header, rows)
    corr_header = ["t"] + [
        f"C_{format_number(y)}_{format_number(x)}" for (y, x) in sorted(corrs)
    ]
    corr_rows = [[t] + [corrs[k].values[i] for k in sorted(corrs)]
                 for i, t in enumerate(times)]
    write_csv(writer.path("correlations.csv"), corr_header, corr_rows)
    rate_set = tcl.build_rate_set(rate_map, xs)
    p0 = np.zeros(xs.shape[0])
    p0[np.nonzero(xs == ctx.config.state_x)[0][0]] = 1.0
    series = tcl.evolve_tcl_master(rate_set, p0, ctx.config.output_times())
    write_series_csv(writer.path("tcl_series.csv"), series)
    return 0


def cmd_fit_gamma(ctx, writer, args):
    corrs, rate_map = ctx.tcl_rate_map()
    fit = tcl.fit_gamma(
        rate_map, ctx.config.kappa, ctx.ladder_cfg.n_sites,
        window=(ctx.config.plateau_lo, ctx.config.plateau_hi), on_irregular="drop",
    )
    naive = stochastic.naive_rates(ctx.ladder_cfg.n_sites, 1.0, ctx.config.kappa)
    report = tcl.check_initial_value(corrs, naive)
    rows = [
        [y, x, fit.per_pair[(y, x)], fit.per_pair_time_dispersion[(y, x)]]
        for (y, x) in sorted(fit.per_pair)
    ]
    write_csv(writer.path("gamma_fit.csv"),
              ["x_to", "x_from", "gamma_pair", "time_dispersion"], rows)
    iv_rows = [[y, x, c] for (y, x), c in zip(report.pairs, report.c_values)]
    write_csv(writer.path("initial_value_check.csv"),
              ["x_to", "x_from", "constant"], iv_rows)
    writer.note("gamma_used", fit.gamma)
    writer.note("gamma_cross_pair_spread", fit.cross_pair_spread)
    writer.note("initial_value_constant", report.constant)
    writer.note("initial_value_note", report.note)
    print(f"gamma (TCL plateau fit): {fit.gamma:.6g}")
    print(f"cross-pair spread: {fit.cross_pair_spread:.3%}")
    print(report.note)
    return 0


def cmd_delta(ctx, writer, args):
    quantum = ctx.quantum_series()
    gamma = ctx.gamma()
    writer.note("gamma_used", gamma)
    model = ctx.stochastic_series(p0=quantum.probabilities[0], gamma=gamma)
    value = analysis.delta_metric(quantum, model, horizon=ctx.config.t_max)
    rows = [[t, quantum.mean()[i], model.mean()[i]] for i, t in enumerate(quantum.times)]
    write_csv(writer.path("delta_trajectories.csv"), ["t", "mean_quantum", "mean_model"], rows)
    write_csv(writer.path("delta.csv"), ["delta"], [[value]])
    writer.note("delta", value)
    print(f"delta = {value:.6g}")
    return 0


def cmd_block_structure(ctx, writer, args):
    block = spectral.dirac_rotate_v_block(ctx.chain_basis, ctx.coupling, 0.0, 1.0)
    report = analysis.block_structure(block)
    fine_rows = []
    for i, er in enumerate(report.fine_row_energies):
        for j, ec in enumerate(report.fine_col_energies):
            fine_rows.append([er, ec, report.fine_matrix[i, j]])
    write_csv(writer.path("block_fine.csv"), ["row_energy", "col_energy", "value"], fine_rows)
    coarse_rows = []
    for i, rc in enumerate(report.row_bin_centers):
        for j, cc in enumerate(report.col_bin_centers):
            coarse_rows.append([rc, cc, report.mean_sq[i, j], int(report.counts[i, j])])
    write_csv(writer.path("block_coarse.csv"),
              ["row_bin_center", "col_bin_center", "mean_sq", "count"], coarse_rows)
    near = report.mean_sq_by_energy_distance(below=1.0)
    far = report.mean_sq_by_energy_distance(above=3.0)
    writer.note("mean_sq_near_diagonal", near)
    writer.note("mean_sq_far_from_diagonal", far)
    return 0


def cmd_eth(ctx, writer, args):
    spec = ctx.spectral_decomposition
    x_op = ladder.build_x_observable(ctx.basis)
    win = spectral.window_projector(spec, ctx.config.window_center, ctx.config.window_width)
    report = analysis.eth_diagonals(spec, x_op, window=win)
    parity = report.parity if report.parity is not None else np.zeros(spec.dim, dtype=int)
    rows = [
        [report.energies[n], report.x_diagonal[n], report.x_squared_diagonal[n], int(parity[n])]
        for n in range(spec.dim)
    ]
    write_csv(writer.path("eth.csv"), ["E_n", "x_diag", "x2_diag", "parity"], rows)
    writer.note("window_mean_x2", report.window_mean_x2)
    writer.note("x2_trace", float(report.x_squared_diagonal.sum()))
    return 0


def cmd_compare(ctx, writer, args):
    quantum = ctx.quantum_series()
    gamma = ctx.gamma()
    writer.note("gamma_used", gamma)
    model = ctx.stochastic_series(p0=quantum.probabilities[0], gamma=gamma)
    report = analysis.compare_report(quantum, model)
    header = (["t"] + [f"dP_{format_number(x)}" for x in quantum.x_values]
              + ["d_mean", "d_variance"])
    rows = [
        [t, *report.prob_deviation[i], report.mean_deviation[i], report.variance_deviation[i]]
        for i, t in enumerate(report.times)
    ]
    write_csv(writer.path("compare.csv"), header, rows)
    writer.note("sup_prob_deviation", report.sup_prob)
    writer.note("sup_mean_deviation", report.sup_mean)
    writer.note("sup_variance_deviation", report.sup_variance)
    print(f"sup |dP_X| = {report.sup_prob:.6g}")
    return 0


FIGURE_KAPPA = {1: 0.2, 2: 0.2, 3: 0.2, 6: 0.15, 7: 0.15}


def cmd_reproduce_figure(ctx, writer, args):
    import dataclasses

    n = args.figure
    config = ctx.config
    if n in FIGURE_KAPPA and abs(config.kappa - FIGURE_KAPPA[n]) > 1e-12:
        config = dataclasses.replace(config, kappa=FIGURE_KAPPA[n])
        writer.note("kappa_pinned_by_figure", FIGURE_KAPPA[n])
    if n in (1, 2, 3, 6, 7):
        # the published curves start at exactly unit subspace occupation, so
        # the window-filtered states are prepared in their X-supported form
        config = dataclasses.replace(
            config, state_kind="window_mixed", window_order="xwx",
            gamma=config.gamma if config.gamma != "fit" else PAPER_GAMMA,
        )
    gamma = PAPER_GAMMA if config.gamma == "fit" else (
        config.gamma if not isinstance(config.gamma, str) else PAPER_GAMMA
    )
    writer.note("gamma_used", gamma)

    if n == 1:
        sub = PipelineContext(dataclasses.replace(config, state_x=1.0))
        quantum = sub.quantum_series()
        write_series_csv(writer.path("fig1_quantum.csv"), quantum)
        model = sub.stochastic_series(p0=quantum.probabilities[0], gamma=gamma)
        write_series_csv(writer.path("fig1_stochastic.csv"), model)
        return 0
    if n in (2, 3, 6, 7):
        for x0 in (0.0, 1.0, 2.0):
            sub = PipelineContext(dataclasses.replace(config, state_x=x0))
            quantum = sub.quantum_series()
            write_series_csv(writer.path(f"fig{n}_quantum_X{format_number(x0)}.csv"), quantum)
            model = sub.stochastic_series(p0=quantum.probabilities[0], gamma=gamma)
            write_series_csv(writer.path(f"fig{n}_stochastic_X{format_number(x0)}.csv"), model)
        return 0
    if n in (4, 5):
        block = spectral.dirac_rotate_v_block(ctx.chain_basis, ctx.coupling, 0.0, 1.0)
        report = analysis.block_structure(block)
        if n == 4:
            rows = []
            for i, er in enumerate(report.fine_row_energies):
                for j, ec in enumerate(report.fine_col_energies):
                    rows.append([er, ec, report.fine_matrix[i, j]])
            write_csv(writer.path("fig4_fine.csv"), ["row_energy", "col_energy", "value"], rows)
        else:
            rows = []
            for i, rc in enumerate(report.row_bin_centers):
                for j, cc in enumerate(report.col_bin_centers):
                    rows.append([rc, cc, report.mean_sq[i, j], int(report.counts[i, j])])
            write_csv(writer.path("fig5_coarse.csv"),
                      ["row_bin_center", "col_bin_center", "mean_sq", "count"], rows)
        return 0
    raise ConfigError(f"no such figure: {n} (choose 1..7)")


HANDLERS = {
    "info": cmd_info,
    "evolve-quantum": cmd_evolve_quantum,
    "evolve-stochastic": cmd_evolve_stochastic,
    "tcl": cmd_tcl,
    "fit-gamma": cmd_fit_gamma,
    "delta": cmd_delta,
    "block-structure": cmd_block_structure,
    "eth": cmd_eth,
    "compare": cmd_compare,
    "reproduce-figure": cmd_reproduce_figure,
}


def build_parser():
    parser = _Parser(prog="spinfpe", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="path to a key = value config file")
        p.add_argument("--out", default="spinfpe_out", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the run seed")
        p.add_argument("--threads", type=int, default=None, help="worker threads (0 = defaults)")
        p.add_argument("--dense-ceiling", type=int, default=None,
                       help="largest dimension allowed for dense diagonalization")
        p.add_argument("--convention", choices=("half", "pauli"), default=None,
                       help="operator normalization")
        if name == "reproduce-figure":
            p.add_argument("figure", type=int, help="figure number, 1..7")
    return parser


def load_config(args) -> RunConfig:
    import dataclasses

    if args.config is not None:
        with open(args.config, "r", encoding="utf-8") as fh:
            config = parse_config(fh.read())
    else:
        config = RunConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.threads is not None:
        overrides["threads"] = args.threads
    if args.dense_ceiling is not None:
        overrides["dense_ceiling"] = args.dense_ceiling
    if args.convention is not None:
        overrides["convention"] = args.convention
    if overrides:
        config = dataclasses.replace(config, **overrides)
    return config


def _apply_threads(config):
    if config.threads > 0:
        import numba

        numba.set_num_threads(config.threads)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args)
        _apply_threads(config)
        ctx = PipelineContext(config)
        writer = RunWriter(args.out, config)
        code = HANDLERS[args.command](ctx, writer, args)
        writer.finalize()
        return code
    except (ConfigError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except (propagation.PropagationError, tcl.PlateauError,
            spectral.DimensionBudgetError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
