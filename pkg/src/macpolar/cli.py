"""Command-line front end: polarization sweeps, code construction,
block-error simulation, and rate-region export.

Every command is deterministic given its configuration and seed: outputs
carry no timestamps, randomness flows from the single seed through fixed
(seed, purpose, chunk) spawn keys, and Monte Carlo work is chunked in
fixed blocks so results do not depend on the worker count.

Exit codes: 0 success, 2 usage or validation failure, 3 alphabet budget
exceeded (retry with --mode mc), 4 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .channel import (EXTREMAL_KINDS, build_adder_mac, build_extremal_mac,
                      load_mac)
from .codec import (CodeSpec, construct, corner_construct, simulate_block,
                    simulate_corner)
from .errors import AlphabetCapError, ValidationError
from .metrics import info_triple, region_vertices
from .polarizer import genie_estimate, polarization_stats, polarize_exact
from .transform import DEFAULT_ALPHABET_CAP

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CAPACITY = 3
EXIT_IO = 4

_DEFAULTS = {
    "channel": None,
    "channel_file": None,
    "q": 2,
    "flip_prob": 0.0,
    "depth": 4,
    "mode": "exact",
    "trials": 1000,
    "genie_trials": 10000,
    "seed": 0,
    "epsilon": 0.1,
    "delta": 0.25,
    "lam": 0.5,
    "pe_threshold": 1e-3,
    "out": "macpolar_out",
    "format": "csv",
    "cap": DEFAULT_ALPHABET_CAP,
    "workers": 1,
    "codespec": None,
    "corner": False,
}


@dataclass
class RunConfig:
    command: str
    channel: str | None
    channel_file: str | None
    q: int
    flip_prob: float
    depth: int
    mode: str
    trials: int
    genie_trials: int
    seed: int
    epsilon: float
    delta: float
    lam: float
    pe_threshold: float
    out: str
    format: str
    cap: int
    workers: int
    codespec: str | None
    corner: bool

    def validate(self) -> None:
        if self.channel is None and self.channel_file is None:
            raise ValidationError("specify --channel or --channel-file")
        if self.depth < 0:
            raise ValidationError(f"depth must be >= 0, got {self.depth}")
        if self.mode not in ("exact", "mc"):
            raise ValidationError(f"mode must be exact or mc, got {self.mode!r}")
        if self.mode == "mc" and self.trials < 1:
            raise ValidationError("trials must be >= 1 in mc mode")
        if self.trials < 1:
            raise ValidationError("trials must be >= 1")
        if not (0.0 < self.epsilon < 0.5):
            raise ValidationError(
                f"epsilon must lie in (0, 0.5), got {self.epsilon}")
        if not (0.0 < self.delta < 0.5):
            raise ValidationError(f"delta must lie in (0, 0.5), got {self.delta}")
        if not (0.0 <= self.lam <= 1.0):
            raise ValidationError(f"lambda must lie in [0, 1], got {self.lam}")
        if self.format not in ("csv", "json"):
            raise ValidationError(
                f"format must be csv or json, got {self.format!r}")
        if self.workers < 1:
            raise ValidationError("workers must be >= 1")
        if self.cap < 1:
            raise ValidationError("cap must be >= 1")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="macpolar",
        description="Two-user MAC polarization, polar coding, and simulation")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML file with defaults for any flag")
    common.add_argument("--channel",
                        choices=("adder",) + EXTREMAL_KINDS,
                        help="builtin channel name")
    common.add_argument("--channel-file", dest="channel_file",
                        help="path to a channel-spec JSON file")
    common.add_argument("--q", type=int, help="field size for builtin channels")
    common.add_argument("--flip-prob", dest="flip_prob", type=float,
                        help="symbol flip probability of the adder channel")
    common.add_argument("--depth", type=int, help="recursion depth (n = 2**depth)")
    common.add_argument("--mode", choices=("exact", "mc"),
                        help="exact synthesis or Monte Carlo estimation")
    common.add_argument("--trials", type=int, help="Monte Carlo trial count")
    common.add_argument("--genie-trials", dest="genie_trials", type=int,
                        help="construction-stage trials for simulate --corner")
    common.add_argument("--seed", type=int, help="root seed for all randomness")
    common.add_argument("--epsilon", type=float,
                        help="classification / selection threshold")
    common.add_argument("--delta", type=float,
                        help="threshold for polarization statistics")
    common.add_argument("--lambda", dest="lam", type=float,
                        help="contention split toward user 1")
    common.add_argument("--pe-threshold", dest="pe_threshold", type=float,
                        help="error threshold for mc-mode construction")
    common.add_argument("--out", help="output directory")
    common.add_argument("--format", choices=("csv", "json"),
                        help="report file format")
    common.add_argument("--cap", type=int, help="output-alphabet cap")
    common.add_argument("--workers", type=int, help="parallel worker count")

    sub.add_parser("polarize", parents=[common],
                   help="sweep all synthesized channels")
    sub.add_parser("construct", parents=[common],
                   help="build a two-user code specification")
    sim = sub.add_parser("simulate", parents=[common],
                         help="Monte Carlo block-error simulation")
    sim.add_argument("--codespec", help="code specification JSON to simulate")
    sim.add_argument("--corner", action="store_true", default=None,
                     help="use the two-code successive-decoding scheme")
    sub.add_parser("region", parents=[common],
                   help="export the rate-region vertices")
    return parser


def _load_config_file(path: str) -> dict:
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ValidationError(f"config file {path}: {exc}") from exc
    mapped = {}
    for key, value in data.items():
        mapped[{"lambda": "lam", "channel-file": "channel_file"}.get(key, key)
               .replace("-", "_")] = value
    unknown = set(mapped) - set(_DEFAULTS)
    if unknown:
        raise ValidationError(
            f"config file {path}: unknown keys {sorted(unknown)}")
    return mapped


def _merge_config(args: argparse.Namespace) -> RunConfig:
    from_file = _load_config_file(args.config) if args.config else {}
    values = {}
    for key, default in _DEFAULTS.items():
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
        elif key in from_file:
            values[key] = from_file[key]
        else:
            values[key] = default
    cfg = RunConfig(command=args.command, **values)
    cfg.validate()
    return cfg


def _resolve_channel(cfg: RunConfig):
    if cfg.channel_file is not None:
        return load_mac(cfg.channel_file)
    if cfg.channel == "adder":
        return build_adder_mac(cfg.q, cfg.flip_prob)
    return build_extremal_mac(cfg.channel)


def _run_sweep(cfg: RunConfig, mac):
    if cfg.mode == "exact":
        return polarize_exact(mac, cfg.depth, cap=cfg.cap)
    return genie_estimate(mac, cfg.depth, cfg.trials, cfg.seed,
                          workers=cfg.workers)


def _outpath(cfg: RunConfig, name: str) -> str:
    os.makedirs(cfg.out, exist_ok=True)
    return os.path.join(cfg.out, name)


def _write_json(path: str, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def cmd_polarize(cfg: RunConfig) -> int:
    mac = _resolve_channel(cfg)
    report = _run_sweep(cfg, mac)
    if cfg.format == "csv":
        report.write_csv(_outpath(cfg, "polarization.csv"), cfg.epsilon)
    else:
        report.write_json(_outpath(cfg, "polarization.json"), cfg.epsilon)
    if report.mode == "exact":
        stats = polarization_stats(report, cfg.delta)
        summary = {"mode": "exact", "depth": cfg.depth, "delta": cfg.delta,
                   "epsilon": cfg.epsilon, **stats}
        print(f"polarize: n={report.n} mean_i12={stats['mean_i12']!r} "
              f"unpolarized_fraction={stats['unpolarized_fraction']!r}")
    else:
        pe = [e.pe_joint for e in report.entries]
        summary = {"mode": "mc", "depth": cfg.depth, "trials": cfg.trials,
                   "seed": cfg.seed, "mean_pe_joint": sum(pe) / len(pe),
                   "max_pe_joint": max(pe)}
        print(f"polarize: n={report.n} mean_pe_joint={summary['mean_pe_joint']!r}")
    _write_json(_outpath(cfg, "summary.json"), summary)
    return EXIT_OK


def cmd_construct(cfg: RunConfig) -> int:
    mac = _resolve_channel(cfg)
    report = _run_sweep(cfg, mac)
    spec = construct(mac, report, cfg.epsilon, cfg.lam, seed=cfg.seed,
                     pe_threshold=cfg.pe_threshold)
    spec.save(_outpath(cfg, "codespec.json"))
    print(f"construct: rate_u={spec.rate_u!r} rate_v={spec.rate_v!r} "
          f"sum_rate={spec.sum_rate!r}")
    return EXIT_OK


def cmd_simulate(cfg: RunConfig) -> int:
    mac = _resolve_channel(cfg)
    if cfg.corner:
        spec1, spec2 = corner_construct(
            mac, cfg.depth, cfg.epsilon, mode=cfg.mode,
            trials=cfg.genie_trials, seed=cfg.seed, cap=cfg.cap,
            workers=cfg.workers)
        report = simulate_corner(spec1, spec2, mac, cfg.trials, cfg.seed,
                                 workers=cfg.workers)
    else:
        if cfg.codespec is None:
            raise ValidationError("simulate needs --codespec (or --corner)")
        spec = CodeSpec.load(cfg.codespec)
        if spec.q != mac.q:
            raise ValidationError(
                f"code spec q={spec.q} does not match channel q={mac.q}")
        report = simulate_block(spec, mac, cfg.trials, cfg.seed,
                                workers=cfg.workers)
    if cfg.format == "csv":
        report.write_csv(_outpath(cfg, "simulation.csv"))
    else:
        report.write_json(_outpath(cfg, "simulation.json"))
    ub = "" if report.union_bound is None else f" union_bound={report.union_bound!r}"
    print(f"simulate: trials={report.trials} bler={report.bler!r}{ub}")
    return EXIT_OK


def cmd_region(cfg: RunConfig) -> int:
    mac = _resolve_channel(cfg)
    triple = info_triple(mac)
    vertices = region_vertices(triple)
    if cfg.format == "csv":
        with open(_outpath(cfg, "region.csv"), "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["r1", "r2"])
            for r1, r2 in vertices:
                writer.writerow([repr(r1), repr(r2)])
    else:
        _write_json(_outpath(cfg, "region.json"), {
            "i1": triple.i1, "i2": triple.i2, "i12": triple.i12,
            "vertices": [[r1, r2] for r1, r2 in vertices],
        })
    print(f"region: i1={triple.i1!r} i2={triple.i2!r} i12={triple.i12!r} "
          f"vertices={len(vertices)}")
    return EXIT_OK


_COMMANDS = {
    "polarize": cmd_polarize,
    "construct": cmd_construct,
    "simulate": cmd_simulate,
    "region": cmd_region,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = _merge_config(args)
        return _COMMANDS[args.command](cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AlphabetCapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
