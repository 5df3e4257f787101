"""Command-line entry points.

Subcommands::

    simulate      integrate one system and dump the sampled trajectory
    residuals     residual norms of one approximation level over time
    converge      mu-sweep shadowing errors and fitted orders per level
    oscillatory   frequency sweep of the expansion remainder + fitted slopes
    energy-audit  energy drift of a mass-in-mass run

Exit status: 0 success, 1 validation failure (bad flags, bad config,
singular mu = 0 request), 2 numerical failure (blow-up, unresolvable
stiffness).  Artifacts are CSV/JSON files under the output directory, each
stamped with the tool version and the hash of the effective configuration.
The ``LATTICE_SHADOW_WORKERS`` environment variable overrides ``--workers``.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .config import (
    RunConfig,
    config_hash,
    default_config,
    parse_config_file,
    with_overrides,
)
from .core import LatticeState, mechanical_energy, mu_norm
from .dynamics import SYSTEMS, integrate
from .errors import (
    BlowUpError,
    ConfigParseError,
    ConfigurationError,
    FitError,
    InvalidLatticeError,
    LatticeShadowError,
    SingularLimitError,
    ValidationError,
)
from .experiments import (
    build_initial_data,
    check_level_ordering,
    convergence_sweep,
    default_pulse,
)
from .oscillatory import INTEGRANDS, error_order_fit
from .output import emit_csv, emit_json, ensure_dir
from .residuals import residuals as residual_sample

_VALIDATION_ERRORS = (
    ValidationError,
    ConfigParseError,
    InvalidLatticeError,
    SingularLimitError,
    FitError,
)
_NUMERICAL_ERRORS = (BlowUpError, ConfigurationError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); use our codes
        raise ValidationError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="INI run configuration")
    common.add_argument("--out", metavar="DIR", help="output directory override")
    common.add_argument("--workers", type=int, default=None,
                        help="worker pool size (default: available cores)")
    common.add_argument("--seed", type=int, default=None, help="seed override")

    parser = _Parser(prog="lattice-shadow",
                     description="mass-in-mass lattice shadowing experiments")
    parser.add_argument("--version", action="version",
                        version=f"lattice-shadow {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common],
                       help="integrate one system and dump the trajectory")
    p.add_argument("--mu", type=float, default=None, help="internal mass override")
    p.add_argument("--system", choices=SYSTEMS, default="mim")

    p = sub.add_parser("residuals", parents=[common],
                       help="residual norms of one approximation level")
    p.add_argument("--mu", type=float, default=None)
    p.add_argument("--level", type=int, choices=(0, 1, 2), default=0)

    p = sub.add_parser("converge", parents=[common],
                       help="mu-sweep convergence experiment")
    p.add_argument("--level", action="append", type=int, choices=(0, 1, 2),
                   default=None, help="level to sweep (repeatable)")

    p = sub.add_parser("oscillatory", parents=[common],
                       help="expansion remainder order sweep")
    p.add_argument("--function", choices=sorted(INTEGRANDS), default="sin")
    p.add_argument("--orders", default="0,2",
                   help="comma-separated expansion orders")
    p.add_argument("--omegas", default="25,50,100,200",
                   help="comma-separated frequency grid")
    p.add_argument("--t", type=float, default=1.0, help="evaluation time")

    sub.add_parser("energy-audit", parents=[common],
                   help="energy drift of a mass-in-mass run")
    return parser


def _load_config(args) -> RunConfig:
    cfg = parse_config_file(args.config) if args.config else default_config()
    return with_overrides(
        cfg,
        mu=getattr(args, "mu", None),
        seed=args.seed,
        output_dir=args.out,
    )


def _resolve_workers(args) -> int:
    env = os.environ.get("LATTICE_SHADOW_WORKERS")
    if env is not None:
        try:
            n = int(env)
        except ValueError as exc:
            raise ValidationError(
                f"LATTICE_SHADOW_WORKERS must be an integer, got {env!r}"
            ) from exc
    elif args.workers is not None:
        n = args.workers
    else:
        n = os.cpu_count() or 1
    if n < 1:
        raise ValidationError("worker count must be >= 1")
    return n


def _header(cfg: RunConfig) -> str:
    return f"lattice-shadow {__version__} config={config_hash(cfg)}"


def _json_header(cfg: RunConfig) -> dict:
    return {"tool": "lattice-shadow", "version": __version__,
            "config_hash": config_hash(cfg)}


def _site_labels(prefix: str, num_sites: int):
    width = len(str(num_sites - 1))
    return [f"{prefix}_{i:0{width}d}" for i in range(num_sites)]


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _cmd_simulate(args) -> int:
    cfg = _load_config(args)
    params = cfg.params
    R0, P0 = default_pulse(params.num_sites)
    state0 = LatticeState(R0, P0, np.zeros_like(R0), P0.copy())
    traj = integrate(state0, params, cfg.policy, args.system, cfg.t_star,
                     cfg.sample_dt)
    table = {"t": [float(t) for t in traj.times]}
    for comp in ("R", "P", "r", "p"):
        mat = traj.component_matrix(comp)
        for i, label in enumerate(_site_labels(comp, params.num_sites)):
            table[label] = [float(v) for v in mat[:, i]]
    ensure_dir(cfg.output_dir)
    path = os.path.join(cfg.output_dir, "trajectory.csv")
    emit_csv(table, path, _header(cfg))
    print(f"simulate: wrote {path} ({len(traj)} samples, system={args.system})")
    return 0


def _cmd_residuals(args) -> int:
    cfg = _load_config(args)
    params = cfg.params
    if params.mu <= 0:
        raise SingularLimitError("residual weighting requires mu > 0")
    R0, P0 = default_pulse(params.num_sites)
    _, approx0 = build_initial_data(args.level, R0, P0, params)
    from .experiments import ApproximationLevel

    system = ApproximationLevel(args.level).system
    traj = integrate(approx0, params, cfg.policy, system, cfg.t_star, cfg.sample_dt)
    rows = [residual_sample(traj, params, i) for i in range(len(traj))]
    table = {
        "t": [s.t for s in rows],
        "res1_norm": [float(np.linalg.norm(s.res1)) for s in rows],
        "res2_norm": [float(np.linalg.norm(s.res2)) for s in rows],
        "res3_norm": [float(np.linalg.norm(s.res3)) for s in rows],
        "res4_norm": [float(np.linalg.norm(s.res4)) for s in rows],
        "weighted_norm": [s.weighted_norm for s in rows],
    }
    ensure_dir(cfg.output_dir)
    path = os.path.join(cfg.output_dir, "residuals.csv")
    emit_csv(table, path, _header(cfg))
    sup = max(s.weighted_norm for s in rows)
    print(f"residuals: wrote {path} (level {args.level}, sup weighted norm "
          f"{sup:.6e})")
    return 0


def _cmd_converge(args) -> int:
    cfg = _load_config(args)
    levels = tuple(dict.fromkeys(args.level)) if args.level else cfg.levels
    if not cfg.mu_grid:
        raise ValidationError("mu_grid must be nonempty for converge")
    workers = _resolve_workers(args)
    expcfg = cfg.experiment_config()
    base = default_pulse(cfg.params.num_sites)

    reports = {}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for lv in levels:
                reports[lv] = convergence_sweep(
                    lv, cfg.mu_grid, base, expcfg, map_fn=pool.map
                )
    else:
        for lv in levels:
            reports[lv] = convergence_sweep(lv, cfg.mu_grid, base, expcfg)

    ordering_notes = check_level_ordering(reports) if len(reports) > 1 else []
    ensure_dir(cfg.output_dir)
    json_path = os.path.join(cfg.output_dir, "converge_report.json")
    payload = {
        "levels": {str(lv): reports[lv].to_dict() for lv in levels},
        "ordering_notes": ordering_notes,
    }
    emit_json(payload, json_path, _json_header(cfg))

    mu_col, err_col, lv_col = [], [], []
    for lv in levels:
        rep = reports[lv]
        mu_col.extend(rep.mu_values)
        err_col.extend(rep.sup_errors)
        lv_col.extend([lv] * len(rep.mu_values))
    csv_path = os.path.join(cfg.output_dir, "converge_errors.csv")
    emit_csv({"mu": mu_col, "sup_error": err_col, "level": lv_col},
             csv_path, _header(cfg))

    for lv in levels:
        rep = reports[lv]
        note = f" [{'; '.join(rep.notes)}]" if rep.notes else ""
        print(f"converge: level {lv} slope {rep.fitted_slope:.3f} "
              f"(expected {rep.level.expected_order}, r2 {rep.fit_r2:.4f})"
              f"{note}")
    for note in ordering_notes:
        print(f"converge: note: {note}")
    print(f"converge: wrote {json_path} and {csv_path}")
    return 0


def _cmd_oscillatory(args) -> int:
    cfg = _load_config(args)
    try:
        orders = [int(tok) for tok in args.orders.split(",") if tok.strip()]
        omegas = [float(tok) for tok in args.omegas.split(",") if tok.strip()]
    except ValueError as exc:
        raise ValidationError(f"bad --orders/--omegas value: {exc}") from exc
    if not orders:
        raise ValidationError("need at least one expansion order")
    integrand = INTEGRANDS[args.function]()

    fits = {n: error_order_fit(integrand, n, omegas, t=args.t) for n in orders}
    ensure_dir(cfg.output_dir)
    n_col, w_col, e_col = [], [], []
    for n in orders:
        fit = fits[n]
        n_col.extend([n] * len(fit.omegas))
        w_col.extend(fit.omegas)
        e_col.extend(fit.errors)
    csv_path = os.path.join(cfg.output_dir, "oscillatory_sweep.csv")
    emit_csv({"n": n_col, "omega": w_col, "abs_error": e_col},
             csv_path, _header(cfg))
    json_path = os.path.join(cfg.output_dir, "oscillatory_slopes.json")
    payload = {
        "function": args.function,
        "t": args.t,
        "fits": {
            str(n): {
                "slope": fits[n].slope,
                "r2": fits[n].r2,
                "closed": fits[n].closed,
                "note": fits[n].note,
            }
            for n in orders
        },
    }
    emit_json(payload, json_path, _json_header(cfg))
    for n in orders:
        fit = fits[n]
        desc = "exact closure" if fit.closed else f"slope {fit.slope:.3f}"
        print(f"oscillatory: n={n} {desc}")
    print(f"oscillatory: wrote {csv_path} and {json_path}")
    return 0


def _cmd_energy_audit(args) -> int:
    cfg = _load_config(args)
    params = cfg.params
    R0, P0 = default_pulse(params.num_sites)
    state0 = LatticeState(R0, P0, np.zeros_like(R0), P0.copy())
    traj = integrate(state0, params, cfg.policy, "mim", cfg.t_star, cfg.sample_dt)
    energies = [mechanical_energy(s, params) for s in traj.states]
    e0 = energies[traj.index_of(0.0)]
    ref = max(abs(e0), np.finfo(float).tiny)
    drifts = [abs(e - e0) / ref for e in energies]
    ensure_dir(cfg.output_dir)
    path = os.path.join(cfg.output_dir, "energy_audit.csv")
    emit_csv({"t": [float(t) for t in traj.times],
              "energy": energies,
              "rel_drift": drifts}, path, _header(cfg))
    ratio = traj.meta.norm_ratio_max
    print(f"energy-audit: wrote {path}")
    print(f"energy-audit: max relative drift {max(drifts):.3e}, "
          f"max norm ratio {ratio:.6f}" if ratio is not None else "")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "residuals": _cmd_residuals,
    "converge": _cmd_converge,
    "oscillatory": _cmd_oscillatory,
    "energy-audit": _cmd_energy_audit,
}


def run_command(argv) -> int:
    """Run one CLI invocation; returns the process exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except LatticeShadowError as exc:  # fallback: treat as validation
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
