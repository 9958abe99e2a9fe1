"""Command line experiment runner.

Every subcommand writes CSV tables with a fixed column order, two-column
plot-data files, and ``manifest.json``; only the manifest carries
timestamps, so reruns with the same configuration give identical CSVs.
Exit status is 0 on success, 2 on a configuration error and 3 when a
numerical routine aborts.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import scipy

from . import __version__, bubble, diagnostics, functional, greens, radial, spectral
from .config import ConfigError, RunConfig, parse_number, validate
from .errors import GridMismatch, NumericalAbort
from .mesh import DomainSpec, build_masked_grid, build_radial_grid, read_field_csv, write_field_csv

SUBCOMMANDS = ("eig", "maximize", "bubble-tab", "shoot", "green", "diagnose", "sweep")


def _cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_csv(path: Path, columns: list[str], rows: list) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            if isinstance(row, dict):
                row = [row[c] for c in columns]
            w.writerow([_cell(x) for x in row])


class Run:
    """Output directory bookkeeping for one invocation."""

    def __init__(self, cfg: RunConfig, sub: str):
        self.cfg = cfg
        self.sub = sub
        self.out = Path(cfg.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.files: list[str] = []
        self.t0 = time.time()

    def table(self, name: str, columns: list[str], rows: list) -> None:
        write_csv(self.out / name, columns, rows)
        self.files.append(name)

    def series(self, name: str, xname: str, yname: str, x, y) -> None:
        self.table(name, [xname, yname], list(zip(x, y)))

    def field(self, name: str, f) -> None:
        write_field_csv(self.out / name, f)
        self.files.append(name)

    def text(self, name: str, body: str) -> None:
        (self.out / name).write_text(body + "\n", encoding="utf-8")
        self.files.append(name)

    def manifest(self) -> None:
        m = {
            "subcommand": self.sub,
            "config": {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.cfg.to_dict().items()},
            "versions": {
                "package": __version__,
                "python": platform.python_version(),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
            },
            "started": time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(self.t0)),
            "wall_time_s": time.time() - self.t0,
            "outputs": self.files,
        }
        (self.out / "manifest.json").write_text(json.dumps(m, indent=2) + "\n", encoding="utf-8")


def make_grid(cfg: RunConfig):
    if cfg.grid == "radial":
        return build_radial_grid(DomainSpec.parse(cfg.domain).radius, cfg.n)
    return build_masked_grid(cfg.domain, cfg.h)


def _eig(cfg: RunConfig, g):
    return spectral.first_eigenpair(g, p=cfg.p, tol=cfg.eig_tol, max_iter=cfg.eig_max_iter)


def _alpha_values(cfg: RunConfig, lambda1: float) -> list[float]:
    return [a * lambda1 if cfg.relative else a for a in cfg.alphas]


def _opts(cfg: RunConfig) -> functional.MaximizeOptions:
    return functional.MaximizeOptions(tol=cfg.tol, max_iter=cfg.max_iter, exp_cap=cfg.exp_cap)


CANDIDATE_COLUMNS = [
    "alpha", "value", "gamma", "l2sq", "beta", "A", "Lambda", "el_residual", "iterations",
    "converged", "grad_norm", "min_u",
]


def _candidate_row(c: functional.ExtremalCandidate) -> dict:
    return {
        "alpha": c.alpha, "value": c.value, "gamma": c.gamma, "l2sq": c.l2sq, "beta": c.beta,
        "A": c.A, "Lambda": c.Lambda, "el_residual": c.el_residual, "iterations": c.iterations,
        "converged": c.converged, "grad_norm": c.grad_norm, "min_u": c.min_u,
    }


def cmd_eig(run: Run) -> None:
    g = make_grid(run.cfg)
    ep = _eig(run.cfg, g)
    run.table(
        "eig.csv",
        ["lambda1", "residual", "iterations", "p", "h", "n_interior"],
        [[ep.lambda1, ep.residual, ep.iterations, ep.p, g.h, g.n_interior]],
    )
    run.field("eigenfield.csv", ep.v)


def _start(cfg: RunConfig, g):
    if cfg.start == "eigen":
        return None
    return read_field_csv(cfg.start, g)


def cmd_maximize(run: Run) -> None:
    cfg = run.cfg
    g = make_grid(cfg)
    ep = _eig(cfg, g)
    if len(cfg.alphas) != 1:
        raise ConfigError("alphas", "maximize takes exactly one alpha")
    alpha = _alpha_values(cfg, ep.lambda1)[0]
    start = _start(cfg, g)
    c = functional.maximize(g, alpha, start if start is not None else functional.normalize_h1(ep.v), _opts(cfg))
    run.table("candidate.csv", CANDIDATE_COLUMNS, [_candidate_row(c)])
    run.field("candidate_field.csv", c.u)
    run.field("eigenfield.csv", ep.v)
    run.series("plot_history.csv", "iteration", "value", range(len(c.history)), c.history)


def cmd_bubble_tab(run: Run) -> None:
    cfg = run.cfg
    r = np.geomspace(cfg.r_min, cfg.r_max_table, cfg.n_radii)
    tab = bubble.build_tables(r)
    conv = bubble.verified_correction_convention()
    rows = []
    for k, rk in enumerate(r):
        step = min(1e-3, rk / 4)
        rows.append([
            rk, tab.t0[k], tab.s0[k], tab.dilog[k],
            bubble.t0_liouville_residual(rk), bubble.correction_residual(rk, conv, step),
        ])
    run.table("bubble_table.csv", ["r", "t0", "s0", "I", "t0_residual", "correction_residual"], rows)
    a0, b0 = bubble.asymptotic_constants()
    run.table(
        "bubble_constants.csv",
        ["mass_plain", "mass_weighted", "A0_fit", "B0_fit", "A0", "B0", "correction_convention"],
        [[bubble.bubble_mass("plain"), bubble.bubble_mass("weighted"), a0, b0, bubble.A0, bubble.B0, conv]],
    )
    run.series("plot_t0.csv", "r", "t0", r, tab.t0)
    run.series("plot_s0.csv", "r", "s0", r, tab.s0)


def cmd_shoot(run: Run) -> None:
    cfg = run.cfg
    gamma = cfg.gamma
    Lam = cfg.Lambda if cfg.Lambda > 0 else radial.lambda_from_scaling(cfg.mu, gamma)
    mu = radial.mu_from_scaling(Lam, gamma)
    rd = radial.r_delta(gamma, mu, cfg.delta)
    r_max = cfg.r_max if cfg.r_max > 0 else 2 * rd
    p = radial.shoot_bubble(gamma, cfg.A, Lam, r_max, cfg.shoot_tol)
    run.table("profile.csv", ["r", "B", "dB", "energy"], list(zip(p.radii, p.B, p.dB, p.energy)))
    row = {"gamma": gamma, "A": p.A, "A_capped": p.A_capped, "Lambda": Lam, "mu": mu, "r_delta": rd,
           "stopped": p.stopped, "r_end": p.r_end}
    if p.r_end >= rd:
        full = radial.compare_expansion(p, cfg.delta)
        drop = radial.compare_expansion(p, cfg.delta, drop_correction=True)
        row.update(constant=full.constant, constant_without_S=drop.constant,
                   energy_r_delta=p.energy_at(rd))
    else:
        row.update(constant=float("nan"), constant_without_S=float("nan"), energy_r_delta=float("nan"))
    cols = ["gamma", "A", "A_capped", "Lambda", "mu", "r_delta", "r_end", "stopped", "constant",
            "constant_without_S", "energy_r_delta"]
    run.table("shoot_report.csv", cols, [row])
    run.series("plot_profile.csv", "r", "B", p.radii, p.B)


def cmd_green(run: Run) -> None:
    cfg = run.cfg
    g = make_grid(cfg)
    mode = None if cfg.green_mode == "auto" else cfg.green_mode
    o = greens.make_oracle(g, mode)
    rng = np.random.default_rng(cfg.seed)
    pairs = greens.sample_pairs(g.domain, cfg.samples, rng)
    if o.mode == greens.GRID:
        poles = pairs[: cfg.poles, 0]
        pairs[:, 0] = poles[np.arange(len(pairs)) % len(poles)]
    rep = greens.green_bound_check(o, pairs)
    slack = rep.log_slack()
    rows = [[p[0, 0], p[0, 1], p[1, 0], p[1, 1], G, s] for p, G, s in zip(pairs, rep.values, slack)] \
        if o.mode == greens.DISK else [[float("nan")] * 4 + [G, s] for G, s in zip(rep.values, slack)]
    run.table("green.csv", ["x1", "x2", "y1", "y2", "G", "bound_slack"], rows)
    run.table(
        "green_report.csv",
        ["mode", "n_pairs", "positivity_violations", "C_log", "C_grad", "min_G"],
        [[o.mode, rep.n_pairs, rep.positivity_violations, rep.C_log, rep.C_grad, rep.min_G]],
    )
    order = np.argsort(rep.distances, kind="stable")
    run.series("plot_green.csv", "distance", "G", rep.distances[order], rep.values[order])


def cmd_diagnose(run: Run) -> None:
    cfg = run.cfg
    cand = cfg.extra.get("candidate")
    eigf = cfg.extra.get("eigen")
    if not cand or not eigf:
        raise ConfigError("candidate", "diagnose needs --candidate and --eigen field files")
    g = make_grid(cfg)
    try:
        u = read_field_csv(cand, g)
        ev = read_field_csv(eigf, g)
    except GridMismatch as exc:
        raise ConfigError("candidate", str(exc)) from exc
    lam1 = float(np.sum(ev.values[g.interior_nodes] * (g.stiffness @ ev.values[g.interior_nodes]))) / ev.l2sq()
    ep = spectral.EigenPair(lam1, ev, cfg.p, spectral.eigen_residual(lam1, ev), 0)
    if len(cfg.alphas) != 1:
        raise ConfigError("alphas", "diagnose takes exactly one alpha")
    alpha = _alpha_values(cfg, lam1)[0]
    c = functional.candidate_from_field(functional.normalize_h1(u), alpha, cfg.exp_cap)
    rep = diagnostics.expansion_ledger(c, ep, p=cfg.p)
    run.table("ledger.csv", diagnostics.LedgerReport.columns(), [rep.to_row()])
    run.text("ledger.txt", rep.text_block())


def sweep_candidates(cfg: RunConfig, g, ep) -> list:
    alphas = _alpha_values(cfg, ep.lambda1)
    opts = _opts(cfg)
    start = _start(cfg, g)
    start = functional.normalize_h1(ep.v) if start is None else start
    if cfg.continuation:
        out = []
        for a in alphas:
            c = functional.maximize(g, a, start, opts)
            out.append(c)
            start = c.u
        return out
    workers = max(1, min(len(alphas), int(os.environ.get("MT_THREADS", "1") or 1)))
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(lambda a: functional.maximize(g, a, start, opts), alphas))


def cmd_sweep(run: Run) -> None:
    cfg = run.cfg
    g = make_grid(cfg)
    ep = _eig(cfg, g)
    cands = sweep_candidates(cfg, g, ep)
    reps = [diagnostics.expansion_ledger(c, ep, p=cfg.p) for c in cands]
    cols = diagnostics.LedgerReport.columns() + ["iterations"]
    rows = [dict(r.to_row(), iterations=c.iterations) for r, c in zip(reps, cands)]
    run.table("sweep.csv", cols, rows)
    x = [r.alpha_fraction for r in reps]
    run.series("plot_value.csv", "alpha_fraction", "value", x, [r.value for r in reps])
    run.series("plot_gamma.csv", "alpha_fraction", "gamma", x, [r.gamma for r in reps])
    run.series("plot_Lambda_gamma2.csv", "alpha_fraction", "Lambda_gamma2", x, [r.Lambda_gamma2 for r in reps])
    run.series("plot_discrepancy.csv", "alpha_fraction", "discrepancy_coefficient", x,
               [r.discrepancy_coefficient for r in reps])
    run.text("sweep.txt", "\n\n".join(r.text_block() for r in reps))


COMMANDS = {
    "eig": cmd_eig,
    "maximize": cmd_maximize,
    "bubble-tab": cmd_bubble_tab,
    "shoot": cmd_shoot,
    "green": cmd_green,
    "diagnose": cmd_diagnose,
    "sweep": cmd_sweep,
}


def _floats(text: str) -> tuple[float, ...]:
    return tuple(parse_number(x) for x in text.split(",") if x.strip())


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="moser-trudinger", description=__doc__.splitlines()[0])
    ap.add_argument("--config", help="INI configuration file")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--seed", type=int, help="seed for randomized sampling")
    sub = ap.add_subparsers(dest="command", required=True, metavar="subcommand")

    def mesh_flags(p):
        p.add_argument("--domain", help="disk:R, rectangle:a,b or polygon:x,y;x,y;...")
        p.add_argument("--grid", choices=("masked", "radial"))
        p.add_argument("--h", type=parse_number, help="mesh size, e.g. 1/128")
        p.add_argument("--n", type=int, help="radial node count")

    def solver_flags(p):
        p.add_argument("--alpha", type=_floats, dest="alphas", help="comma separated alpha values")
        p.add_argument("--absolute", action="store_true", help="alpha values are absolute, not fractions of lambda1")
        p.add_argument("--tol", type=float)
        p.add_argument("--max-iters", type=int, dest="max_iter")
        p.add_argument("--start", help="'eigen' or a field CSV")

    p = sub.add_parser("eig", help="first Dirichlet eigenpair")
    mesh_flags(p)
    p.add_argument("--p", type=float)
    for name in ("maximize", "sweep"):
        p = sub.add_parser(name, help="maximize the functional" if name == "maximize" else "alpha sweep with ledger")
        mesh_flags(p)
        solver_flags(p)
        if name == "sweep":
            p.add_argument("--no-continuation", action="store_true", help="cold-start every alpha")
    p = sub.add_parser("bubble-tab", help="tables of the limit profiles")
    p.add_argument("--r-min", type=float, dest="r_min")
    p.add_argument("--r-max", type=float, dest="r_max_table")
    p.add_argument("--n-radii", type=int, dest="n_radii")
    p = sub.add_parser("shoot", help="shoot the radial bubble")
    p.add_argument("--gamma", type=float)
    p.add_argument("--A", type=float)
    p.add_argument("--Lambda", type=float)
    p.add_argument("--mu", type=float)
    p.add_argument("--r-max", type=float, dest="r_max")
    p.add_argument("--tol", type=float, dest="shoot_tol")
    p.add_argument("--delta", type=float)
    p = sub.add_parser("green", help="Green's function bound check")
    mesh_flags(p)
    p.add_argument("--mode", dest="green_mode", choices=("auto", greens.DISK, greens.GRID))
    p.add_argument("--samples", type=int)
    p.add_argument("--poles", type=int)
    p = sub.add_parser("diagnose", help="ledger for a stored candidate")
    mesh_flags(p)
    p.add_argument("--candidate", required=True)
    p.add_argument("--eigen", required=True)
    p.add_argument("--alpha", type=_floats, dest="alphas")
    p.add_argument("--absolute", action="store_true")
    return ap


_NOT_CONFIG = {"config", "command", "absolute", "no_continuation", "candidate", "eigen"}


def resolve_config(ns: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if ns.config:
        cfg = RunConfig.from_ini(Path(ns.config).read_text(encoding="utf-8"))
    over = {k: v for k, v in vars(ns).items() if k not in _NOT_CONFIG}
    if getattr(ns, "absolute", False):
        over["relative"] = False
    if getattr(ns, "no_continuation", False):
        over["continuation"] = False
    cfg = cfg.with_overrides(**over)
    extra = {k: getattr(ns, k) for k in ("candidate", "eigen") if getattr(ns, k, None)}
    if extra:
        cfg = cfg.with_overrides(extra=extra)
    return cfg


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        ns = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve_config(ns)
    except (ConfigError, OSError) as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return 2
    problems = validate(cfg)
    if problems:
        for msg in problems:
            print(f"error: invalid config: {msg}", file=sys.stderr)
        return 2
    run = Run(cfg, ns.command)
    try:
        COMMANDS[ns.command](run)
    except ConfigError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return 2
    except NumericalAbort as exc:
        print(f"error: numerical abort in {exc.module}: {exc.reason}", file=sys.stderr)
        return 3
    run.manifest()
    return 0


if __name__ == "__main__":
    sys.exit(main())
