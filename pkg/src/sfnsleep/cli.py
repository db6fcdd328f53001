"""Command-line entry point: ``run`` sweeps, ``fit`` rate models, ``validate-rlnc``."""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, ScenarioConfig, load_config, parse_config
from .evaluation import STRATEGIES, cell_models, run_sweep, user_psnr
from .gf import FieldSpec
from .rate_model import FitError, fit_lad, model_card, read_samples, RateModel
from .rlnc import decode_probability, monte_carlo_full_rank

log = logging.getLogger("sfnsleep")

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE = 0, 1, 2


def fmt(x) -> str:
    """Shortest round-trip text for CSV cells."""
    if x is None:
        return ""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write_csv(path: Path, header, rows):
    lines = [",".join(header)] + [",".join(fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def _list_arg(values, conv):
    if not values:
        return None
    out = []
    for v in values:
        out += [conv(x) for x in str(v).split(",") if x.strip()]
    return out


def _apply_flags(cfg: ScenarioConfig, args) -> ScenarioConfig:
    if args.seed is not None:
        cfg.run.seed = args.seed
    if args.strategy:
        cfg.run.strategies = _list_arg(args.strategy, str.strip)
    if args.budget:
        cfg.run.budgets_w = _list_arg(args.budget, float)
    if args.rbp:
        cfg.run.rbp_counts = _list_arg(args.rbp, int)
    if args.psnr_independent_layers:
        cfg.run.psnr_independent_layers = True
    if args.eq3_interference_term:
        cfg.propagation.eq3_interference_term = True
    if args.invert_constraint:
        cfg.rate.invert_constraint = True
    if args.jobs is not None:
        cfg.run.jobs = args.jobs
    return cfg.validate()


def summarize(result, cfg: ScenarioConfig) -> str:
    """Plain-text digest of a sweep: feasibility counts and strategy margins."""
    lines = [f"cells = {len(result.records)}"]
    for s in cfg.run.strategies:
        recs = [r for r in result.records if r.strategy == s]
        lines.append(f"{s}.feasible = {sum(r.feasible for r in recs)}/{len(recs)}")
    strategies = set(cfg.run.strategies)
    for better in ("msp", "hmsp"):
        if {better, "upa"} <= strategies:
            g = result.epsilon_gain(better, "upa")
            lines.append(f"max_epsilon_gain_{better}_over_upa = {fmt(g) if g is not None else 'n/a'}")
    if {"msp", "hmsp"} <= strategies:
        gaps = []
        for r in result.records:
            if r.strategy == "msp" and r.feasible:
                h = result.get("hmsp", r.budget_w, r.rbp)
                if h.feasible:
                    gaps.append(r.epsilon - h.epsilon)
        if gaps:
            lines.append(f"max_epsilon_gap_msp_minus_hmsp = {fmt(max(gaps))}")
            lines.append(f"mean_epsilon_gap_msp_minus_hmsp = {fmt(math.fsum(gaps) / len(gaps))}")
    return "\n".join(lines) + "\n"


def cmd_run(cfg: ScenarioConfig, out: Path) -> int:
    out.mkdir(parents=True, exist_ok=True)
    run = cfg.run
    stream = cfg.stream()
    model = cfg.rate_model()
    base = cfg.scenario()
    w_rate = model.tb_bandwidth_hz
    result = run_sweep(base, stream, run.budgets_w, run.rbp_counts, run.strategies,
                       model, w_rate, cfg.rate.rbp_bandwidth_hz, jobs=run.jobs)
    L = len(stream.layers)

    header = (["strategy", "budget_w", "rbp", "feasible", "epsilon"]
              + [f"t_{i}" for i in range(1, L + 1)] + [f"p_{i}" for i in range(1, L + 1)]
              + ["iters", "error"])
    rows = []
    for r in result.records:
        ts = list(r.transmissions) or [None] * L
        ps = list(r.powers) or [None] * L
        rows.append([r.strategy, float(r.budget_w), r.rbp, r.feasible, r.epsilon, *ts, *ps,
                     r.iterations, r.error])
    _write_csv(out / "results.csv", header, rows)

    cov_rows = [[r.strategy, float(r.budget_w), r.rbp, lvl, d]
                for r in result.records for lvl, d in enumerate(r.coverage_m, start=1)]
    _write_csv(out / "coverage.csv", ["strategy", "budget_w", "rbp", "level", "distance_m"], cov_rows)

    budget = run.psnr_budget_w if run.psnr_budget_w in run.budgets_w else run.budgets_w[0]
    rbp = run.psnr_rbp if run.psnr_rbp in run.rbp_counts else run.rbp_counts[0]
    sc, cell_model = cell_models(base, model, rbp, w_rate, cfg.rate.rbp_bandwidth_hz)
    users = sorted(sc.users + sc.eval_users, key=lambda u: u.distance_m)
    psnr_rows = []
    for s in run.strategies:
        sol = result.get(s, budget, rbp).solution
        for u in users:
            p = 0.0 if sol is None else user_psnr(sol, stream, u, sc, cell_model,
                                                  run.psnr_independent_layers)
            psnr_rows.append([float(u.distance_m), s, p])
    _write_csv(out / "psnr.csv", ["distance_m", "strategy", "psnr_db"], psnr_rows)

    (out / "summary.txt").write_text(summarize(result, cfg))
    (out / "manifest.txt").write_text(
        f"version = {__version__}\n"
        f"config_sha256 = {cfg.digest()}\n"
        f"seed = {run.seed}\n"
        f"psnr_cell = {fmt(float(budget))} W, {rbp} rbp\n"
        f"rate_model = alpha {fmt(model.alpha)}, beta {fmt(model.beta)}, "
        f"w_per_rbp_hz {fmt(float(w_rate))}\n"
    )
    (out / "config.resolved.cfg").write_text(cfg.canonical_text())
    infeasible = [r for r in result.records if not r.feasible]
    for r in infeasible:
        log.info("infeasible cell %s: %s", r.key, r.error)
    return EXIT_INFEASIBLE if infeasible else EXIT_OK


def cmd_fit(samples_path, W, sigma_min_db, sigma_max_db, invert=False, out=None) -> int:
    samples = read_samples(samples_path)
    fit = fit_lad(samples, W, sigma_min_db, sigma_max_db, invert_constraint=invert)
    card = model_card(RateModel(fit.alpha, fit.beta, sigma_min_db, sigma_max_db, W))
    if out is not None:
        Path(out).write_text(card)
    print(card, end="")
    print(f"residual_sum = {fit.residual!r} ({fit.used} samples used)")
    return EXIT_OK


def cmd_validate_rlnc(kmax, nmax, q_list, trials, seed, out: Path | None = None,
                      z_limit=4.0) -> int:
    rows = []
    worst = 0.0
    for q in q_list:
        fld = FieldSpec(q)
        for k in range(1, kmax + 1):
            for n in range(0, nmax + 1):
                p = decode_probability(k, n, fld)
                est = monte_carlo_full_rank(k, n, fld, trials, seed)
                se = math.sqrt(p * (1 - p) / trials)
                z = (est - p) / se if se > 0 else (0.0 if est == p else math.inf)
                worst = max(worst, abs(z))
                rows.append([k, n, q, p, est, se, z])
    header = ["k", "n", "q", "closed_form", "monte_carlo", "std_error", "z"]
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "rlnc_validation.csv", header, rows)
    print(f"{len(rows)} cases, max |z| = {worst:.3f} (limit {z_limit})")
    return EXIT_OK if worst <= z_limit else EXIT_CONFIG


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _field_order(text):
    v = int(text)
    FieldSpec(v)
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sfnsleep", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="sweep strategies x budgets x TB sizes")
    r.add_argument("--config", help="scenario file (bundled videoA.cfg / videoB.cfg by name)")
    r.add_argument("--out", default="out", type=Path)
    r.add_argument("--seed", type=int)
    r.add_argument("--strategy", action="append", help=f"one of {', '.join(STRATEGIES)}; repeatable")
    r.add_argument("--budget", action="append", help="power budget in W; repeatable")
    r.add_argument("--rbp", action="append", help="RBPs per TB; repeatable")
    r.add_argument("--jobs", type=int)
    r.add_argument("--psnr-independent-layers", action="store_true")
    r.add_argument("--eq3-interference-term", action="store_true")
    r.add_argument("--invert-constraint", action="store_true")

    f = sub.add_parser("fit", help="LAD fit of alpha, beta to rate samples")
    f.add_argument("samples", help="sample file, or a bundled name such as rate_samples.txt")
    f.add_argument("--W", type=float, default=1.62e6, help="TB bandwidth of the samples, Hz")
    f.add_argument("--sigma-min", type=float, default=6.33)
    f.add_argument("--sigma-max", type=float, default=31.32)
    f.add_argument("--invert-constraint", action="store_true")
    f.add_argument("--out", type=Path, help="model card path")

    v = sub.add_parser("validate-rlnc", help="closed form vs Monte Carlo full-rank probability")
    v.add_argument("--kmax", type=_positive_int, default=6)
    v.add_argument("--nmax", type=int, default=10)
    v.add_argument("--q", default="2,4", help="comma-separated field orders")
    v.add_argument("--trials", type=_positive_int, default=100_000)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out", type=Path)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "run":
            cfg = load_config(args.config) if args.config else parse_config("")
            cfg = _apply_flags(cfg, args)
            return cmd_run(cfg, args.out)
        if args.command == "fit":
            from .config import bundled_config
            path = Path(args.samples)
            if not path.exists() and bundled_config(path.name).exists():
                path = bundled_config(path.name)
            return cmd_fit(path, args.W, args.sigma_min, args.sigma_max,
                           args.invert_constraint, args.out)
        if args.command == "validate-rlnc":
            try:
                qs = [_field_order(x) for x in args.q.split(",") if x.strip()]
            except ValueError as e:
                parser.error(f"--q: {e}")
            return cmd_validate_rlnc(args.kmax, args.nmax, qs, args.trials, args.seed, args.out)
    except (ConfigError, FitError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
