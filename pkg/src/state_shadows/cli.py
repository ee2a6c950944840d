"""Command-line experiment runner.

Exit codes: 0 ok, 1 verification failure, 2 configuration error,
3 dimension or size error.
"""
from __future__ import annotations

import argparse
import csv
import itertools
import json
import sys
from pathlib import Path

from . import __version__
from .acceptance import CHECKS, LEVELS, run_suite
from .config import ExperimentConfig, build_ensemble, config_hash
from .distinguishers import distinguisher_report
from .errors import ConfigError, DimMismatchError, NonPositiveObservableError, NotEnumerableError, SizeLimitError
from .moments import MixtureEnsemble, conversion_report, ensemble_moment, sym_dim
from .rng import make_rng
from .shadows import generate_snapshots, median_of_means, plan, report_from_values, snapshot_values

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_DIM = 0, 1, 2, 3


def _meta(cfg_hash: str, seed) -> dict:
    return {"config_hash": cfg_hash, "seed": seed, "version": __version__}


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, meta: dict, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write("# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _seed(args, cfg: ExperimentConfig | None = None):
    if args.seed is not None:
        return args.seed
    return cfg.seed if cfg is not None else 0


def _load(args) -> ExperimentConfig:
    if not args.config:
        raise ConfigError("--config is required for this subcommand")
    return ExperimentConfig.load(args.config)


def _resolve_eps(cfg: ExperimentConfig, ens) -> float:
    """Numeric epsilon, or the exact distance of the ensemble's 3-copy moment when ``"measured"``."""
    if cfg.epsilon != "measured":
        try:
            return float(cfg.epsilon)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"epsilon must be a number or 'measured', got {cfg.epsilon!r}") from exc
    if cfg.bound_kind == "exact":
        return 0.0
    rep = conversion_report(ensemble_moment(ens, 3))
    return rep.eps_rel if cfg.bound_kind == "relative" else rep.eps_add


def _plan(cfg: ExperimentConfig, obs, eps: float):
    try:
        est_cfg = plan(float(cfg.gamma), float(cfg.delta), cfg.bound_kind, obs, eps)
    except NonPositiveObservableError as exc:
        raise ConfigError(str(exc)) from exc
    except ValueError as exc:
        if isinstance(exc, (DimMismatchError, SizeLimitError)):
            raise
        raise ConfigError(str(exc)) from exc
    if cfg.shots is not None:
        from dataclasses import replace

        est_cfg = replace(est_cfg, L=max(1, int(cfg.shots) // est_cfg.K))
    return est_cfg


# --- subcommands ----------------------------------------------------------------

def cmd_estimate(args) -> int:
    cfg = _load(args)
    seed = _seed(args, cfg)
    rho, ens, obs = cfg.build()
    eps = _resolve_eps(cfg, ens)
    est_cfg = _plan(cfg, obs, eps)
    rng = make_rng(seed)
    csv_name = cfg.output.get("csv")
    if csv_name:
        batch = generate_snapshots(rho, ens, est_cfg.total_shots, rng, args.workers)
        values = batch.estimates(obs)
    else:
        values = snapshot_values(rho, ens, obs, est_cfg.total_shots, rng, args.workers)
    report = report_from_values(values, est_cfg, obs, seed)
    meta = _meta(cfg.hash, seed)
    out = Path(args.out)
    payload = {**meta, "report": report.to_json(), "true_value": obs.expectation(rho),
               "ensemble": repr(ens), "observable": repr(obs)}
    _write_json(out / cfg.output.get("report", "report.json"), payload)
    if csv_name:
        rows = ((i, int(k), int(x), int(z), repr(float(v)))
                for i, (k, x, z, v) in enumerate(zip(batch.keys, batch.x, batch.z, values)))
        _write_csv(out / csv_name, meta, ["shot_id", "ensemble_key", "x", "z", "estimate"], rows)
    print(json.dumps({"estimate": report.estimate, "K": report.K, "L": report.L,
                      "true_value": payload["true_value"]}))
    return EXIT_OK


def cmd_verify(args) -> int:
    seed = _seed(args)
    names = args.checks.split(",") if args.checks else None
    if names:
        known = {c[0] for c in CHECKS}
        bad = [n for n in names if n not in known]
        if bad:
            raise ConfigError(f"unknown checks {bad}")
    results = run_suite(args.level, seed, args.workers, names)
    for r in results:
        print(r.line)
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    if args.out:
        meta = _meta(config_hash({"level": args.level, "checks": names}), seed)
        _write_json(Path(args.out) / "verify.json",
                    {**meta, "level": args.level, "results": [r.to_json() for r in results]})
    return EXIT_VERIFY if failed else EXIT_OK


def cmd_moments(args) -> int:
    if args.config:
        raw = json.loads(Path(args.config).read_text()) if Path(args.config).exists() else None
        if raw is None:
            raise ConfigError(f"file not found: {args.config}")
        base = Path(args.config).parent
    else:
        spec: dict = {"name": args.ensemble}
        if args.eps is not None:
            spec["eps"] = args.eps
        raw = {"n": args.n, "t": args.t, "ensemble": spec}
        base = Path(".")
    try:
        n, t = int(raw["n"]), int(raw["t"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"moments needs integer n and t: {exc}") from exc
    sym_dim(n, t)  # size guard before building anything
    ens = build_ensemble(raw["ensemble"], n, base)
    if isinstance(ens, MixtureEnsemble) and ens.base.support() is None and ens.base.analytic_moment(t) is None:
        raise NotEnumerableError(f"no exact {t}-moment for {ens!r}")
    rep = conversion_report(ensemble_moment(ens, t))
    seed = _seed(args)
    payload = {**_meta(config_hash(raw), seed), "ensemble": repr(ens), **rep.to_json()}
    if args.out:
        _write_json(Path(args.out) / "moments.json", payload)
    print(json.dumps(payload, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_distinguish(args) -> int:
    cfg = _load(args)
    seed = _seed(args, cfg)
    rho, ens, obs = cfg.build()
    shots = int(cfg.shots) if cfg.shots is not None else 100_000
    rng = make_rng(seed)
    reports = [distinguisher_report(kind, ens, rho, obs, shots, rng, args.workers).to_json()
               for kind in ("expectation", "variance")]
    payload = {**_meta(cfg.hash, seed), "ensemble": repr(ens), "reports": reports}
    _write_json(Path(args.out) / cfg.output.get("report", "distinguish.json"), payload)
    print(json.dumps(payload, indent=2, sort_keys=True))
    return EXIT_OK


SWEEP_HEADER = ["eps0", "gamma", "delta", "bound_kind", "epsilon", "K", "L", "bias_bound", "variance_bound",
                "estimate", "true_value", "abs_error", "within_bound"]


def cmd_sweep(args) -> int:
    """Grid over ``eps0`` (mixture weight), ``gamma`` and ``delta``; one CSV row per cell."""
    cfg = _load(args)
    seed = _seed(args, cfg)
    grid = cfg.grid or {}
    eps_grid = grid.get("eps0", [None])
    gammas = grid.get("gamma", [cfg.gamma])
    deltas = grid.get("delta", [cfg.delta])
    rng = make_rng(seed)
    rows = []
    for eps0, gamma, delta in itertools.product(eps_grid, gammas, deltas):
        ens_spec = cfg.ensemble
        if eps0 is not None:
            base = cfg.ensemble if not (isinstance(cfg.ensemble, dict) and cfg.ensemble.get("name") == "mixture") \
                else cfg.ensemble.get("base", "haar")
            ens_spec = {"name": "mixture", "eps": eps0, "base": base}
            if isinstance(cfg.ensemble, dict) and "psi" in cfg.ensemble:
                ens_spec["psi"] = cfg.ensemble["psi"]
        cell = ExperimentConfig.from_dict({**cfg.raw, "ensemble": ens_spec, "gamma": gamma, "delta": delta,
                                           "grid": {}}, cfg.base_dir)
        rho, ens, obs = cell.build()
        eps = _resolve_eps(cell, ens)
        est_cfg = _plan(cell, obs, eps)
        values = snapshot_values(rho, ens, obs, est_cfg.total_shots, rng, args.workers)
        est = median_of_means(values, est_cfg.K, est_cfg.L)
        true = obs.expectation(rho)
        err = abs(est - true)
        rows.append([eps0 if eps0 is not None else "", gamma, delta, est_cfg.bound_kind, repr(eps), est_cfg.K,
                     est_cfg.L, repr(est_cfg.bias_bound), repr(est_cfg.variance_bound), repr(est), repr(true),
                     repr(err), int(err <= gamma + est_cfg.bias_bound)])
    path = Path(args.out) / cfg.output.get("csv", "sweep.csv")
    _write_csv(path, _meta(cfg.hash, seed), SWEEP_HEADER, rows)
    print(f"wrote {len(rows)} rows to {path}")
    return EXIT_OK


# --- entry point ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment JSON file")
    common.add_argument("--seed", type=int, default=None, help="unsigned 64-bit seed (overrides the config)")
    common.add_argument("--workers", type=int, default=1, help="worker threads; never changes results")
    common.add_argument("--out", default=".", help="output directory")

    parser = argparse.ArgumentParser(prog="state-shadows", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", parents=[common], help="median-of-means estimate of Tr(O rho)")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("verify", parents=[common], help="run the acceptance suite")
    p.add_argument("--level", choices=LEVELS, default="quick")
    p.add_argument("--checks", default=None, help="comma-separated subset, e.g. AC-1,AC-7")
    p.set_defaults(func=cmd_verify, out=None)

    p = sub.add_parser("moments", parents=[common], help="design distances of an ensemble moment")
    p.add_argument("--ensemble", default="haar")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--t", type=int, default=2)
    p.add_argument("--eps", type=float, default=None, help="mixture weight for --ensemble mixture")
    p.set_defaults(func=cmd_moments, out=None)

    p = sub.add_parser("distinguish", parents=[common], help="expectation and variance distinguishers")
    p.set_defaults(func=cmd_distinguish)

    p = sub.add_parser("sweep", parents=[common], help="grid over eps0, gamma and delta")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except (DimMismatchError, SizeLimitError, NotEnumerableError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIM
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
