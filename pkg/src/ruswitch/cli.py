"""Batch experiment front end.

Each invocation runs one named experiment against a scenario config and
writes deterministic CSV artifacts (plus optional SVG plots and a manifest
recording the config hash and seed).  Exit codes: 0 success, 2 config
error, 3 infeasible experiment, 4 internal nonconvergence.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import channel as chan
from . import linkbudget as lb
from . import optimizer as opt
from . import receiver as rx
from . import waveform as wf
from .config import ConfigError, ScenarioConfig, config_digest, load_scenario
from .pa import UnreachableBackoffError
from .rng import stream

log = logging.getLogger("ruswitch")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_NONCONVERGENCE = 4


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return repr(value)
    return str(value)


def _write_csv(path: Path, header: list[str], rows: list[tuple]) -> None:
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    log.info("wrote %s (%d rows)", path, len(rows))


def _save_plot(fig, path: Path) -> None:
    fig.savefig(path, format="svg")
    log.info("wrote %s", path)


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


class _Run:
    """Shared context for one experiment invocation."""

    def __init__(self, args):
        self.args = args
        self.cfg: ScenarioConfig = load_scenario(args.config, args.set)
        self.seed = self.cfg.seed if args.seed is None else args.seed
        self.trials = self.cfg.trials if args.trials is None else args.trials
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.outputs: list[str] = []

    def csv(self, name: str, header: list[str], rows: list[tuple]) -> None:
        _write_csv(self.out / name, header, rows)
        self.outputs.append(name)

    def manifest(self, command: str) -> None:
        doc = {
            "command": command,
            "tool_version": __version__,
            "config_sha256": config_digest(self.cfg),
            "config_path": self.args.config,
            "overrides": list(self.args.set),
            "seed": self.seed,
            "trials": self.trials,
            "outputs": self.outputs,
        }
        path = self.out / "manifest.json"
        path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
        log.info("wrote %s", path)

    def bmin_table(self) -> dict[str, float]:
        req = self.cfg.sweep_evm_req_db
        table = {}
        for kind in wf.WAVEFORMS:
            table[kind] = rx.min_backoff(self.cfg, kind, req, self.trials, self.seed)
            log.info("minimum backoff %s at %.1f dB requirement: %.2f dB",
                     kind, req, table[kind])
        return table

    def channel_stats(self) -> dict[str, chan.ChannelGains]:
        draws = self.cfg.sweep.channel_draws
        median = chan.median_channel_gains(draws, stream(self.seed, "chanstats"))
        fixed = chan.channel_gains(chan.draw_flat_mimo(2, 2, stream(self.seed, "chanfixed")))
        return {"median": median, "fixed-draw": fixed}


def _cmd_papr(run: _Run) -> int:
    cfg = run.cfg
    rows, summary = [], []
    curves = {}
    for kind in wf.WAVEFORMS:
        samples = wf.papr_samples(run.trials, cfg.allocated_tones, cfg.fft_size,
                                  cfg.modulation_order, cfg.mapping_scheme, kind,
                                  cfg.papr_oversample, run.seed, cfg.guard_tones)
        lo = math.floor(samples.min() * 10) / 10
        hi = math.ceil(samples.max() * 10) / 10
        thresholds = np.round(np.arange(lo, hi + 0.05, 0.1), 6)
        ccdf = np.array([(samples > t).mean() for t in thresholds])
        keep = ccdf > 0
        curves[kind] = (thresholds[keep], ccdf[keep])
        rows += [(kind, float(t), float(c)) for t, c in zip(thresholds[keep], ccdf[keep])]
        if run.trials >= 1000:
            summary.append((kind, 1e-3, wf.ccdf_level(samples, 1e-3)))
    run.csv("papr_ccdf.csv", ["waveform", "papr_db", "ccdf"], rows)
    if summary:
        run.csv("papr_summary.csv", ["waveform", "ccdf_prob", "papr_db"], summary)
    if run.args.plot:
        plt = _pyplot()
        fig, ax = plt.subplots()
        for kind, (t, c) in curves.items():
            ax.semilogy(t, c, label=kind)
        ax.set_xlabel("PAPR threshold (dB)")
        ax.set_ylabel("CCDF")
        ax.grid(True, which="both")
        ax.legend()
        _save_plot(fig, run.out / "papr_ccdf.svg")
    return EXIT_OK


def _cmd_evm_sweep(run: _Run) -> int:
    cfg = run.cfg
    grid = np.arange(cfg.sweep.backoff_min_db,
                     cfg.sweep.backoff_max_db + cfg.sweep.backoff_step_db / 2,
                     cfg.sweep.backoff_step_db)
    rows = []
    curves = {kind: [] for kind in wf.WAVEFORMS}
    for kind in wf.WAVEFORMS:
        for b in grid:
            rep = rx.measure_evm(cfg, kind, float(b), run.trials, run.seed)
            rows.append((kind, float(b), rep.evm_db, run.trials, run.seed))
            curves[kind].append(rep.evm_db)
    run.csv("evm_sweep.csv", ["waveform", "backoff_db", "evm_db", "trials", "seed"], rows)
    if run.args.plot:
        plt = _pyplot()
        fig, ax = plt.subplots()
        for kind in wf.WAVEFORMS:
            ax.plot(grid, curves[kind], marker="o", label=kind)
        ax.set_xlabel("output backoff (dB)")
        ax.set_ylabel("EVM (dB)")
        ax.grid(True)
        ax.legend()
        _save_plot(fig, run.out / "evm_vs_backoff.svg")
        b_show = 5.0 if grid.min() <= 5.0 <= grid.max() else float(grid[len(grid) // 2])
        fig, axes = plt.subplots(1, 2, figsize=(9, 4.5))
        for ax, kind in zip(axes, wf.WAVEFORMS):
            ref, est = rx.constellation_sample(cfg, kind, b_show, run.seed)
            ax.plot(est.real, est.imag, ".", markersize=1.5, alpha=0.4)
            ax.plot(ref.real, ref.imag, "k.", markersize=3)
            ax.set_title(f"{kind} at {b_show:g} dB backoff")
            ax.set_aspect("equal")
        _save_plot(fig, run.out / "constellations.svg")
    return EXIT_OK


def _cmd_min_backoff(run: _Run) -> int:
    req = run.cfg.sweep_evm_req_db if run.args.req is None else run.args.req
    rows = []
    for kind in wf.WAVEFORMS:
        b = rx.min_backoff(run.cfg, kind, req, run.trials, run.seed)
        rows.append((kind, req, b, run.trials, run.seed))
    run.csv("min_backoff.csv",
            ["waveform", "evm_req_db", "b_min_db", "trials", "seed"], rows)
    return EXIT_OK


def _cmd_crossover(run: _Run) -> int:
    cfg = run.cfg
    bmin = run.bmin_table()
    grid = np.linspace(cfg.sweep.se_min, cfg.sweep.se_max, cfg.sweep.se_points)
    curve_rows, point_rows = [], []
    plot_data = {}
    for label, gains in run.channel_stats().items():
        inp = lb.LinkBudgetInput.from_config(cfg, gains)
        for mode_simo in (lb.SIMO_CP, lb.SIMO_DFT):
            b_simo = bmin[lb.waveform_of(mode_simo)]
            b_mimo = bmin[lb.waveform_of(lb.MIMO_CP)]
            series = []
            for se in grid:
                s = lb.ru_power_at_se(float(se), mode_simo, inp, cfg.circuit, cfg.pa, b_simo)
                m = lb.ru_power_at_se(float(se), lb.MIMO_CP, inp, cfg.circuit, cfg.pa, b_mimo)
                if s is None or m is None:
                    continue
                curve_rows.append((float(se), s.p_ru_w, m.p_ru_w, mode_simo, label))
                series.append((float(se), s.p_ru_w, m.p_ru_w))
            point = lb.crossover(inp, mode_simo, grid, cfg.circuit, cfg.pa, b_simo, b_mimo)
            if point is None:
                point_rows.append((mode_simo, label, False, math.nan, math.nan))
            else:
                point_rows.append((mode_simo, label, True, point.se, point.p_ru_w))
            plot_data[(mode_simo, label)] = series
    run.csv("crossover_curves.csv",
            ["se", "p_ru_simo", "p_ru_mimo", "mode_simo", "channel_label"], curve_rows)
    run.csv("crossover_points.csv",
            ["mode_simo", "channel_label", "found", "se_star", "p_ru_w"], point_rows)
    if run.args.plot:
        plt = _pyplot()
        fig, ax = plt.subplots()
        for (mode_simo, label), series in plot_data.items():
            if label != "median" or not series:
                continue
            se = [r[0] for r in series]
            ax.plot(se, [r[1] for r in series], label=mode_simo)
        if plot_data.get((lb.SIMO_CP, "median")):
            series = plot_data[(lb.SIMO_CP, "median")]
            ax.plot([r[0] for r in series], [r[2] for r in series],
                    "k--", label=lb.MIMO_CP)
        ax.set_xlabel("spectral efficiency (bits/s/Hz)")
        ax.set_ylabel("radio-unit power (W)")
        ax.grid(True)
        ax.legend()
        _save_plot(fig, run.out / "crossover.svg")
    return EXIT_OK


def _cmd_sweep_se(run: _Run) -> int:
    cfg = run.cfg
    bmin = run.bmin_table()
    gains = run.channel_stats()["median"]
    grid = np.linspace(cfg.sweep.se_min, cfg.sweep.se_max, cfg.sweep.se_points)
    cells = opt.sweep_modes(cfg, grid, gains, bmin)
    rows = [(c.se_bits_hz, c.mode, c.inner, c.b_db, c.p_tx_w, c.p_ru_w,
             c.ee_bits_per_joule, c.feasible) for c in cells]
    run.csv("se_sweep.csv",
            ["se_bits_hz", "mode", "inner_selection", "b_db", "p_tx_w", "p_ru_w",
             "ee_bits_per_joule", "feasible"], rows)
    if run.args.plot:
        plt = _pyplot()
        for field, fname, ylabel in (("p_ru_w", "power_vs_se.svg", "radio-unit power (W)"),
                                     ("ee_bits_per_joule", "ee_vs_se.svg",
                                      "energy efficiency (bits/J)")):
            fig, ax = plt.subplots()
            for mode in opt.MODES:
                pts = [(c.se_bits_hz, getattr(c, field)) for c in cells
                       if c.mode == mode and c.feasible]
                if pts:
                    ax.plot([p[0] for p in pts], [p[1] for p in pts], label=mode)
            ax.set_xlabel("spectral efficiency (bits/s/Hz)")
            ax.set_ylabel(ylabel)
            ax.grid(True)
            ax.legend()
            _save_plot(fig, run.out / fname)
    return EXIT_OK


def _cmd_optimize_ee(run: _Run) -> int:
    cfg = run.cfg
    bmin = run.bmin_table()
    gains = run.channel_stats()["median"]
    opt_rows, detail_rows = [], []
    for mode in opt.MODES:
        res = opt.solve_mode(mode, gains, cfg, bmin)
        opt_rows.append((mode, res.p_star_w, res.y_star, res.ee_bits_per_joule,
                         res.iterations))
        detail_rows.append((mode, res.inner, res.b_db, res.se_bits_hz, res.p_ru_w,
                            res.ee_bits_per_joule))
        log.info("%s: EE %.4g bits/J with %s at %.3g W per amplifier",
                 mode, res.ee_bits_per_joule, res.inner, res.p_star_w)
    run.csv("ee_optimum.csv", ["mode", "p_star", "y_star", "ee", "iterations"], opt_rows)
    run.csv("ee_detail.csv",
            ["mode", "inner_selection", "b_db", "se_bits_hz", "p_ru_w",
             "ee_bits_per_joule"], detail_rows)
    if run.args.plot:
        plt = _pyplot()
        fig, ax = plt.subplots()
        ax.bar([r[0] for r in opt_rows], [r[3] for r in opt_rows])
        ax.set_ylabel("peak energy efficiency (bits/J)")
        ax.grid(True, axis="y")
        _save_plot(fig, run.out / "ee_optimum.svg")
    return EXIT_OK


_COMMANDS = {
    "papr": _cmd_papr,
    "evm-sweep": _cmd_evm_sweep,
    "min-backoff": _cmd_min_backoff,
    "crossover": _cmd_crossover,
    "sweep-se": _cmd_sweep_se,
    "optimize-ee": _cmd_optimize_ee,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ruswitch",
                                     description=__doc__.split("\n\n")[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="scenario file (default: bundled)")
    common.add_argument("--set", action="append", default=[], metavar="SEC.KEY=VAL",
                        help="override one config value (repeatable)")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--seed", type=int, default=None, help="override the seed")
    common.add_argument("--trials", type=int, default=None,
                        help="override trial / symbol count")
    common.add_argument("--plot", action="store_true", help="also write SVG plots")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("papr", parents=[common],
                   help="PAPR CCDF of both waveforms (--trials = symbol count)")
    sub.add_parser("evm-sweep", parents=[common],
                   help="EVM versus output backoff for both waveforms")
    p = sub.add_parser("min-backoff", parents=[common],
                       help="minimum backoff meeting an EVM requirement")
    p.add_argument("--req", type=float, default=None,
                   help="EVM requirement in dB (default: optimizer.sweep_evm_req_db)")
    sub.add_parser("crossover", parents=[common],
                   help="single- vs two-stream radio-unit power crossover")
    sub.add_parser("sweep-se", parents=[common],
                   help="power and efficiency of all modes over a rate grid")
    sub.add_parser("optimize-ee", parents=[common],
                   help="fractional-programming efficiency optimum per mode")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("RUSWITCH_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        run = _Run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        status = _COMMANDS[args.command](run)
    except (rx.InfeasibleEvmError, opt.ConstraintConflictError, lb.SaturationCapError,
            UnreachableBackoffError) as exc:
        print(f"infeasible experiment: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except opt.NonconvergenceError as exc:
        print(f"nonconvergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    run.manifest(args.command)
    return status


if __name__ == "__main__":
    sys.exit(main())
