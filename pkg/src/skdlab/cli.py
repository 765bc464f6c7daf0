"""Command-line experiment runner.

Subcommands: train-teachers, distill, gradcheck, simulate-gradients,
sample-stats, compare-regimes. Most take ``--config`` (a TOML file, see
``skdlab.config``) plus ``--preset``, ``--seed``, and ``--out`` overrides.
Exit codes: 0 success, 2 configuration error, 3 numeric failure (non-finite
loss or a failed gradient check).
"""

import argparse
import csv
import dataclasses
import io
import json
import os
import sys
import tempfile
from pathlib import Path

from .config import load_config
from .exceptions import ConfigError, ParseError, RunError, ShapeError, SkdlabError
from .harness import (
    SIM_CSV_COLUMNS,
    compare_regimes,
    distill,
    gradcheck,
    sample_stats,
    simulate_gradients,
    train_teachers,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_json(path: Path, payload: dict) -> None:
    _atomic_write(path, json.dumps(payload, indent=2) + "\n")


def _write_csv(path: Path, rows: list[dict], columns) -> None:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    _atomic_write(path, buf.getvalue())


def _add_common(parser: argparse.ArgumentParser, config_required: bool = True) -> None:
    parser.add_argument("--config", required=config_required, help="TOML experiment config")
    parser.add_argument("--preset", default=None, help="named preset to apply over the file")
    parser.add_argument("--seed", type=int, default=None, help="override run.seeds with one seed")
    parser.add_argument("--out", default=None, help="override run.out_dir")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="skdlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-teachers", help="train and checkpoint every configured teacher")
    _add_common(p)

    p = sub.add_parser("distill", help="distill the student for each configured seed")
    _add_common(p)

    p = sub.add_parser("gradcheck", help="finite-difference sweep over all loss families")
    _add_common(p, config_required=False)
    p.add_argument("--instances", type=int, default=1000, help="instances per loss family")

    p = sub.add_parser("simulate-gradients", help="ledger simulation CSV for the update amounts")
    _add_common(p)

    p = sub.add_parser("sample-stats", help="sampler frequency table and chi-square p-value")
    _add_common(p)
    p.add_argument("--draws", type=int, default=100_000)

    p = sub.add_parser("compare-regimes", help="regime comparison table with improvement arrows")
    _add_common(p)
    return parser


def _cmd_train_teachers(args) -> int:
    cfg = load_config(args.config, preset=args.preset, seed=args.seed, out=args.out)
    paths, reports = train_teachers(cfg)
    out = Path(cfg.out_dir)
    for report in reports:
        name = f"teacher_{report.team_name}_seed{report.seed}.json"
        _write_json(out / name, report.to_dict())
    for (seed, name), path in paths.items():
        print(f"seed {seed}: {name} -> {path}")
    return EXIT_OK


def _cmd_distill(args) -> int:
    cfg = load_config(args.config, preset=args.preset, seed=args.seed, out=args.out)
    out = Path(cfg.out_dir)
    for seed in cfg.seeds:
        report = distill(cfg, seed)
        path = out / f"distill_{cfg.regime}_seed{seed}.json"
        _write_json(path, report.to_dict())
        acc = report.final["test"]["accuracy"]
        print(f"seed {seed}: test accuracy {acc:.4f} -> {path}")
    return EXIT_OK


def _cmd_gradcheck(args) -> int:
    seed = args.seed if args.seed is not None else 0
    report = gradcheck(instances=args.instances, seed=seed)
    if args.out:
        _write_json(Path(args.out) / "gradcheck.json", report.to_dict())
    for family, err in report.max_rel_err.items():
        status = "PASS" if err < report.tolerance else "FAIL"
        print(f"{family}: max rel err {err:.3e} [{status}]")
    print(f"runtime {report.runtime_s:.2f}s over {report.instances_per_family} instances/family")
    return EXIT_OK if report.passed else EXIT_NUMERIC


def _cmd_simulate_gradients(args) -> int:
    cfg = load_config(args.config, preset=args.preset, out=args.out)
    sim = cfg.sim
    if args.seed is not None:
        sim = dataclasses.replace(sim, seed=args.seed)
    rows = simulate_gradients(sim, cfg.distribution)
    path = Path(cfg.out_dir) / "simulate_gradients.csv"
    _write_csv(path, rows, SIM_CSV_COLUMNS)
    print(f"{len(rows)} rows -> {path}")
    return EXIT_OK


def _cmd_sample_stats(args) -> int:
    cfg = load_config(args.config, preset=args.preset, out=args.out)
    if cfg.distribution is None:
        raise ConfigError("sample-stats needs a distribution in the config")
    seed = args.seed if args.seed is not None else 0
    result = sample_stats(cfg.distribution, args.draws, seed)
    path = Path(cfg.out_dir) / "sample_stats.json"
    _write_json(path, result)
    freqs = ", ".join(f"{f:.4f}" for f in result["frequencies"])
    print(f"frequencies [{freqs}] p-value {result['p_value']:.4g} -> {path}")
    return EXIT_OK


def _cmd_compare_regimes(args) -> int:
    cfg = load_config(args.config, preset=args.preset, seed=args.seed, out=args.out)
    rows = compare_regimes(cfg)
    columns = list(rows[0].keys())
    path = Path(cfg.out_dir) / "compare_regimes.csv"
    _write_csv(path, rows, columns)
    for row in rows:
        print(f"{row['regime']:>14}: acc {row['acc_last_mean']:.4f} ± {row['acc_last_sd']:.4f} "
              f"{row['arrow']}")
    print(f"table -> {path}")
    return EXIT_OK


_COMMANDS = {
    "train-teachers": _cmd_train_teachers,
    "distill": _cmd_distill,
    "gradcheck": _cmd_gradcheck,
    "simulate-gradients": _cmd_simulate_gradients,
    "sample-stats": _cmd_sample_stats,
    "compare-regimes": _cmd_compare_regimes,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, ParseError, ShapeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RunError, FloatingPointError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SkdlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
