"""Command-line front end.

Every subcommand reads one JSON config (``--config``), fills in defaults,
rejects unknown keys, runs, and prints a report of the form
``{"command": ..., "config": <resolved config>, "result": ...}``.  With
``--out DIR`` the report and any CSV side outputs are also written to disk.
Failures print ``{"error": {"kind": ..., "message": ...}}`` and exit with 1.
"""

from __future__ import annotations

import argparse
import copy
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .data import make_imbalanced_blobs, sample_blobs
from .energy import EnergySpec, energy
from .errors import InvalidConfig, MHEError
from .experiments import compare_regularizers
from .mlp import RegularizerConfig, init_mlp, train
from .optimizer import OptimizerConfig, minimize, random_sphere_init
from .theory import asymptotic_check

log = logging.getLogger("mhe")

_ENERGY = {"s": 2.0, "distance": "euclidean", "space": "full", "beta": None}
_OPTIMIZER = {
    "step_size": 0.1,
    "max_iters": 20_000,
    "grad_tol": 1e-8,
    "step_decay": 0.5,
    "step_growth": 1.1,
    "record_every": 0,
}

DEFAULTS = {
    "energy": {
        "seed": 0,
        "points": None,
        "points_csv": None,
        "energy": _ENERGY,
    },
    "minimize": {
        "seed": 0,
        "n": 10,
        "dim_ambient": 3,
        "init_csv": None,
        "energy": _ENERGY,
        "optimizer": _OPTIMIZER,
    },
    "compare": {
        "seed": 0,
        "n": 10,
        "dim_ambient": 3,
        "n_seeds": 20,
        "s": 2.0,
        "optimizer": _OPTIMIZER,
    },
    "theory": {
        "seed": 0,
        "s": 1.0,
        "d": 2,
        "sample_counts": [20, 50, 100],
        "restarts": 3,
        "n_caps": 1000,
        "optimizer": _OPTIMIZER,
    },
    "train": {
        "seed": 0,
        "dataset": {
            "n_classes": 10,
            "per_class": [20] + [1000] * 9,
            "dim": 16,
            "spread": 0.15,
            "test_per_class": 200,
        },
        "model": {"hidden": [32], "feature_dim": 2, "feature_activation": "identity"},
        "regularizer": {
            "lambda_w": 0.0,
            "lambda_h": 0.0,
            "lambda_o": 0.0,
            "hidden_spec": {"s": 2.0, "distance": "euclidean", "space": "full"},
            "output_spec": {"s": 2.0, "distance": "euclidean", "space": "full"},
            "output_mode": "full_sum",
            "weight_decay": "norm",
            "divide_hidden_by_layers": False,
        },
        "epochs": 30,
        "batch_size": 64,
        "lr": 0.1,
        "grad_clip": 5.0,
        "dump_features": True,
    },
}


def resolve(defaults: dict, given: dict, where: str = "") -> dict:
    """Merge ``given`` over ``defaults``; unknown keys are an error."""
    unknown = sorted(set(given) - set(defaults))
    if unknown:
        raise InvalidConfig(f"unknown config field(s) {unknown}" + (f" in '{where}'" if where else ""))
    out = copy.deepcopy(defaults)
    for key, value in given.items():
        if isinstance(defaults[key], dict):
            if not isinstance(value, dict):
                raise InvalidConfig(f"'{where + key}' must be an object")
            out[key] = resolve(defaults[key], value, f"{where}{key}.")
        else:
            out[key] = value
    return out


def _spec(section: dict) -> EnergySpec:
    return EnergySpec.from_dict(section)


def _opt(section: dict, seed: int) -> OptimizerConfig:
    return OptimizerConfig(seed=seed, **section)


def cmd_energy(cfg: dict, out: Path | None) -> dict:
    if (cfg["points"] is None) == (cfg["points_csv"] is None):
        raise InvalidConfig("give exactly one of 'points' or 'points_csv'")
    if cfg["points"] is not None:
        points = np.asarray(cfg["points"], dtype=float)
    else:
        points = io.read_points_csv(cfg["points_csv"])
    return energy(points, _spec(cfg["energy"])).to_dict()


def cmd_minimize(cfg: dict, out: Path | None) -> dict:
    spec = _spec(cfg["energy"])
    opt = _opt(cfg["optimizer"], cfg["seed"])
    if cfg["init_csv"] is not None:
        init = io.read_points_csv(cfg["init_csv"])
    else:
        init = random_sphere_init(cfg["n"], cfg["dim_ambient"], cfg["seed"])
    traj = minimize(init, spec, opt)
    log.info("minimize: %s after %d iterations, energy %.10g",
             traj.stop_reason, traj.n_iters, traj.final_energy)
    if out is not None:
        io.write_points_csv(out / "final.csv", traj.final)
    return traj.to_dict()


def cmd_compare(cfg: dict, out: Path | None) -> dict:
    seeds = [cfg["seed"] + k for k in range(int(cfg["n_seeds"]))]
    report = compare_regularizers(cfg["n"], cfg["dim_ambient"], seeds, cfg["s"],
                                  _opt(cfg["optimizer"], cfg["seed"]))
    return report.to_dict()


def cmd_theory(cfg: dict, out: Path | None) -> dict:
    report = asymptotic_check(cfg["s"], cfg["d"], cfg["sample_counts"], cfg["restarts"],
                              _opt(cfg["optimizer"], cfg["seed"]), cfg["n_caps"], cfg["seed"])
    if out is not None:
        io.write_points_csv(out / "configuration.csv", report.configuration)
    return report.to_dict()


def cmd_train(cfg: dict, out: Path | None) -> dict:
    seed = cfg["seed"]
    ds, mc = cfg["dataset"], cfg["model"]
    reg = RegularizerConfig.from_dict(cfg["regularizer"])
    data_seed, test_seed, init_seed, train_seed = np.random.SeedSequence(seed).spawn(4)
    data = make_imbalanced_blobs(ds["n_classes"], ds["per_class"], ds["dim"], ds["spread"], data_seed)
    test = sample_blobs(data.means, ds["test_per_class"], ds["spread"], test_seed)
    sizes = [ds["dim"], *mc["hidden"], mc["feature_dim"], ds["n_classes"]]
    model = init_mlp(sizes, init_seed, feature_activation=mc["feature_activation"])
    _, report = train(model, data, reg, cfg["epochs"], cfg["batch_size"], cfg["lr"], train_seed,
                      test=test, dump_features=cfg["dump_features"], grad_clip=cfg["grad_clip"])
    log.info("train: accuracy %.4f, recall %s", report.accuracy,
             [round(r, 3) for r in report.per_class_recall])
    if out is not None and report.features is not None and report.features.shape[1] == 2:
        io.write_features_csv(out / "features.csv", report.features, report.feature_labels)
    return report.to_dict()


COMMANDS = {
    "energy": cmd_energy,
    "minimize": cmd_minimize,
    "compare": cmd_compare,
    "theory": cmd_theory,
    "train": cmd_train,
}
REPORT_NAMES = {
    "energy": "energy.json",
    "minimize": "trajectory.json",
    "compare": "compare.json",
    "theory": "theory.json",
    "train": "train.json",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mhe", description="Minimum hyperspherical energy tools.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file; omitted fields take defaults")
        p.add_argument("--out", help="directory for the report and CSV outputs")
        p.add_argument("--verbose", action="store_true", help="log progress to stderr")
    return parser


def run(command: str, config: dict, out: Path | None = None) -> dict:
    """Resolve ``config`` and execute ``command``; returns the full report."""
    cfg = resolve(DEFAULTS[command], config)
    if not isinstance(cfg["seed"], int) or isinstance(cfg["seed"], bool):
        raise InvalidConfig("seed must be an integer")
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    result = COMMANDS[command](cfg, out)
    report = {"command": command, "config": cfg, "result": result}
    if out is not None:
        io.write_json(out / REPORT_NAMES[command], report)
    return report


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    for old in list(log.handlers):
        log.removeHandler(old)
    if args.verbose:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
        log.addHandler(handler)
    log.setLevel(logging.INFO if args.verbose else logging.WARNING)
    try:
        config = io.read_json(args.config) if args.config else {}
        out = Path(args.out) if args.out else None
        report = run(args.command, config, out)
    except MHEError as exc:
        print(io.dumps({"error": exc.to_dict()}))
        return 1
    except (OSError, TypeError, ValueError) as exc:
        kind = "IOError" if isinstance(exc, OSError) else "InvalidConfig"
        print(io.dumps({"error": {"kind": kind, "message": str(exc)}}))
        return 1
    print(io.dumps(report))
    return 0


if __name__ == "__main__":
    sys.exit(main())
