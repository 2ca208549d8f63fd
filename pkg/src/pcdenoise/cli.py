"""Command line front end.

Subcommands cover the full pipeline: add-noise, denoise, metric,
train-field, benchmark. Settings resolve as flags > config file > defaults;
the effective values are echoed to stderr. Exit codes: 0 success, 1 runtime
failure (divergence), 2 usage or input errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from . import __version__
from .errors import Diverged, InvalidInput

log = logging.getLogger("pcdenoise")

# Tunables that a --config file may set, per subcommand, with their defaults.
# Required paths stay flag-only.
DEFAULTS = {
    "add-noise": {"kind": "gaussian", "level": 0.02, "seed": 0},
    "denoise": {
        "field": "mls", "steps": 15, "alpha": 0.9, "beta": 0.2,
        "gamma": 0.95, "knn": 4,
    },
    "metric": {},
    "train-field": {
        "sigma_s": 0.03, "samples": 16, "lr": 0.05, "epochs": 30,
        "batch": 64, "seed": 0, "knn": 4,
    },
    "benchmark": {},
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(2)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pcdenoise", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"pcdenoise {__version__}")
    parser.add_argument("--config", metavar="FILE", help="TOML file with per-subcommand settings")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("add-noise", help="corrupt a point cloud with seeded noise")
    p.add_argument("--in", dest="inp", required=True, metavar="XYZ")
    p.add_argument("--out", required=True, metavar="XYZ")
    p.add_argument("--kind", choices=("gaussian", "laplace", "uniform"))
    p.add_argument("--level", type=float)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("denoise", help="run momentum ascent over an estimated gradient field")
    p.add_argument("--in", dest="inp", required=True, metavar="XYZ")
    p.add_argument("--out", required=True, metavar="XYZ")
    p.add_argument("--field", metavar="SPEC",
                   help="mls | oracle:<mesh.off> | learned:<model.npz>")
    p.add_argument("--steps", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--knn", type=int)
    p.add_argument("--trace", metavar="JSONL", help="write per-step position snapshots")

    p = sub.add_parser("metric", help="report error measures against a clean reference")
    p.add_argument("--denoised", required=True, metavar="XYZ")
    p.add_argument("--clean", required=True, metavar="XYZ")
    p.add_argument("--mesh", metavar="OFF")
    p.add_argument("--json", dest="json_out", metavar="FILE", help="also write a JSON report")

    p = sub.add_parser("train-field", help="fit the perceptron gradient predictor")
    p.add_argument("--clean", required=True, metavar="XYZ_OR_OFF")
    p.add_argument("--noisy", required=True, metavar="XYZ")
    p.add_argument("--out", required=True, metavar="NPZ")
    p.add_argument("--sigma-s", dest="sigma_s", type=float)
    p.add_argument("--samples", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--knn", type=int)

    p = sub.add_parser("benchmark", help="run a sweep plan and write result tables")
    p.add_argument("--plan", required=True, metavar="TOML")
    p.add_argument("--out", required=True, metavar="DIR")

    return parser


def _load_config(path) -> dict:
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except FileNotFoundError:
        raise InvalidInput(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise InvalidInput(f"{path}: malformed TOML: {exc}") from None
    unknown = sorted(set(data) - set(DEFAULTS))
    if unknown:
        raise InvalidInput(f"{path}: unknown config table(s): {', '.join(unknown)}")
    for section, table in data.items():
        if not isinstance(table, dict):
            raise InvalidInput(f"{path}: [{section}] must be a table")
        bad = sorted(set(table) - set(DEFAULTS[section]))
        if bad:
            raise InvalidInput(f"{path}: unknown key(s) in [{section}]: {', '.join(bad)}")
    return data


def _effective(command: str, args, config: dict) -> dict:
    """flags > config file > defaults; flags parse with default=None."""
    table = config.get(command, {})
    out = {}
    for key, default in DEFAULTS[command].items():
        flag_val = getattr(args, key, None)
        out[key] = flag_val if flag_val is not None else table.get(key, default)
    log.info("effective %s settings: %s", command,
             " ".join(f"{k}={out[k]}" for k in sorted(out)))
    return out


def _cmd_add_noise(args, cfg):
    from .io import load_xyz, save_xyz
    from .noise import NoiseSpec, add_noise

    cloud = load_xyz(args.inp)
    out = add_noise(cloud, NoiseSpec(cfg["kind"], cfg["level"], cfg["seed"]))
    save_xyz(out, args.out)
    log.info("wrote %d points to %s", len(out), args.out)
    return 0


def _cmd_denoise(args, cfg):
    from .fields import parse_provider
    from .geometry import build_knn_graph
    from .io import load_xyz, save_xyz
    from .solver import AscentConfig, denoise

    cloud = load_xyz(args.inp)
    graph = build_knn_graph(cloud, cfg["knn"])
    field = parse_provider(cfg["field"], cloud=cloud, graph=graph)
    config = AscentConfig(cfg["steps"], cfg["alpha"], cfg["beta"], cfg["gamma"])
    out, trajectory = denoise(cloud, field, graph, config,
                              record_trajectory=args.trace is not None)
    save_xyz(out, args.out)
    if args.trace is not None:
        trajectory.write_jsonl(args.trace)
        log.info("wrote trajectory to %s", args.trace)
    log.info("wrote %d points to %s", len(out), args.out)
    return 0


def _cmd_metric(args, cfg):
    from .io import load_off, load_xyz
    from .metrics import make_report

    denoised = load_xyz(args.denoised)
    clean = load_xyz(args.clean)
    mesh = load_off(args.mesh) if args.mesh else None
    inputs = {"denoised": str(args.denoised), "clean": str(args.clean)}
    if args.mesh:
        inputs["mesh"] = str(args.mesh)
    report = make_report(denoised, clean, mesh=mesh, inputs=inputs)
    print(f"chamfer: {report.chamfer:.17g} (x1e4: {report.chamfer * 1e4:.6f})")
    if report.point_to_mesh is not None:
        print(f"point_to_mesh: {report.point_to_mesh:.17g} "
              f"(x1e4: {report.point_to_mesh * 1e4:.6f})")
    if args.json_out:
        with open(args.json_out, "w", encoding="utf-8") as f:
            f.write(report.to_json())
        log.info("wrote report to %s", args.json_out)
    return 0


def _cmd_train_field(args, cfg):
    from .io import load_off, load_xyz
    from .learned import TrainConfig, save_model, train_field

    reference = load_off(args.clean) if str(args.clean).endswith(".off") else load_xyz(args.clean)
    noisy = load_xyz(args.noisy)
    tc = TrainConfig(sigma_s=cfg["sigma_s"], samples_per_anchor=cfg["samples"],
                     lr=cfg["lr"], epochs=cfg["epochs"], batch=cfg["batch"],
                     seed=cfg["seed"], knn=cfg["knn"])
    params, losses = train_field(reference, noisy, tc)
    save_model(params, args.out, feature_knn=cfg["knn"])
    print(f"final epoch loss: {losses[-1]:.17g}")
    log.info("wrote model to %s", args.out)
    return 0


def _cmd_benchmark(args, cfg):
    from .bench import load_plan, run_benchmark

    plan = load_plan(args.plan)
    rows = run_benchmark(plan, out_dir=args.out)
    failed = sum(1 for r in rows if r["status"] != "ok")
    print(f"{len(rows)} cells, {failed} failed, plan hash {plan.hash()}")
    return 0


_COMMANDS = {
    "add-noise": _cmd_add_noise,
    "denoise": _cmd_denoise,
    "metric": _cmd_metric,
    "train-field": _cmd_train_field,
    "benchmark": _cmd_benchmark,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = _load_config(args.config) if args.config else {}
        cfg = _effective(args.command, args, config)
        return _COMMANDS[args.command](args, cfg)
    except InvalidInput as exc:
        print(f"pcdenoise: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"pcdenoise: error: {exc}", file=sys.stderr)
        return 2
    except Diverged as exc:
        print(f"pcdenoise: diverged: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
