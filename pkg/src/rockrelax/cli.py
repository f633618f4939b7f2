"""Command line entry point ``rockrelax``.

Exit codes: 0 on success, 2 on configuration errors, 3 when ``--strict`` is
given and some solver stopped without meeting its tolerance.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields

from .experiments import (EXAMPLES, ConfigError, ExperimentConfig, gamma_schedule_study,
                          geometric_schedule, run_example, theta_sweep)

log = logging.getLogger("rockrelax")

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGED = 0, 2, 3

_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _coerce(key: str, raw: str):
    kind = str(_FIELD_TYPES[key])
    raw = raw.strip()
    if "bool" in kind:
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    if "int" in kind and "float" not in kind:
        return int(raw)
    if "float" in kind:
        return float(raw)
    return raw


def read_config(path: str) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            out[key] = _coerce(key, value)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from exc
    return out


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError as exc:
        raise ConfigError(f"cannot parse number list {text!r}") from exc


def parse_schedule(text: str) -> list[tuple[float, float]]:
    """``eps:theta,eps:theta,...``"""
    pairs = []
    for item in text.split(","):
        parts = item.split(":")
        if len(parts) != 2:
            raise ConfigError(f"schedule entries must be eps:theta, got {item!r}")
        try:
            pairs.append((float(parts[0]), float(parts[1])))
        except ValueError as exc:
            raise ConfigError(f"bad schedule entry {item!r}") from exc
    return pairs


def _common(p):
    p.add_argument("--example", choices=EXAMPLES)
    p.add_argument("--corruption", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", dest="output_dir")
    p.add_argument("--config", help="flat key = value file; flags override it")
    p.add_argument("--strict", action="store_true",
                   help="exit with status 3 if any solver misses its tolerance")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rockrelax",
                                     description="Rockafellian relaxation experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("run", help="true, corrupted and relaxed solves for one setting"))
    sweep = sub.add_parser("sweep", help="relaxed solves over several theta values")
    _common(sweep)
    sweep.add_argument("--thetas", required=True, help="comma separated theta values")
    gamma = sub.add_parser("gamma", help="distance to the true optimum along a schedule")
    _common(gamma)
    group = gamma.add_mutually_exclusive_group(required=True)
    group.add_argument("--schedule", help="eps:theta pairs, comma separated")
    group.add_argument("--k-max", type=int, help="use eps_k = 2^-k, theta_k = eps_k^-1/2")
    return parser


def _config(args) -> ExperimentConfig:
    values = read_config(args.config) if args.config else {}
    for key in ("example", "corruption", "theta", "seed", "output_dir"):
        v = getattr(args, key)
        if v is not None:
            values[key] = v
    try:
        return ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _print_report(r) -> None:
    print(f"{r.example} corruption={r.corruption:g} theta={r.theta:g}: "
          f"E_rel={r.e_rel:.3e} E_ratio={r.e_ratio:.3g} V_ratio={r.v_ratio:.4g} "
          f"corrupted_deleted={r.corrupted_deleted}/{r.corrupted_total} "
          f"clean_deleted={r.clean_deleted}/{r.clean_total} converged={r.converged}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = _config(args)
        if args.command == "run":
            reports = [run_example(cfg).report]
        elif args.command == "sweep":
            reports = theta_sweep(cfg, _floats(args.thetas))
        else:
            schedule = (parse_schedule(args.schedule) if args.schedule
                        else geometric_schedule(args.k_max))
            for row in gamma_schedule_study(cfg.example, schedule, cfg):
                print(f"k={row.k} eps={row.eps:g} theta={row.theta:g} distance={row.distance:.6e}")
            return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for r in reports:
        _print_report(r)
    if args.strict and not all(r.converged for r in reports):
        log.warning("at least one solver stopped before reaching its tolerance")
        return EXIT_NONCONVERGED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
