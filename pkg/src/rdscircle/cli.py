"""Command-line entry point: simulate | structure | conjugacy | classify.

A JSON config drives every run; all defaults are materialized into the
config echoed inside each output file, so identical configs reproduce
outputs byte for byte.  Exit codes: 0 ok, 2 config error, 3 structural
estimation error, 4 conjugacy construction error, 5 numeric error.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .classifier import ClassifierParams, classify_topological
from .conjugacy import ConjugacyReport, build_conjugacy, conjugation_residual
from .dynamics import NoiseWindow
from .errors import (ConfigError, ConjugacyConstructionError, NumericError,
                     RdsCircleError, StructureEstimationError, UsageError)
from .family import build_family, canonical
from .serialize import dumps_json, write_csv, write_json
from .structure import MCParams, estimate_minimal_structure, estimate_stationary_histogram

log = logging.getLogger("rdscircle")

DEFAULT_CONFIG = {
    "schema_version": 1,
    "master_seed": 0,
    "families": [],
    "window": {"half_width": 512},
    "mc": {
        "n_bins": 2048,
        "n_samples": 200000,
        "n_burn": 1000,
        "n_alpha": 64,
        "m_max": 12,
    },
    "conjugacy": {"n_max": 48, "n_h": 40, "grid": 512, "subdiv": 8,
                  "target": "auto", "trend_half_widths": []},
    "classifier": {"n_windows": 200, "n_pull": 192, "fit_tol": 5e-3,
                   "strict_no_floor": 200},
    "simulate": {"n_steps": 256, "x0": 0.0},
    "out_dir": "out",
}


def _deep_merge(base, override, path="config"):
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if key not in base:
            raise ConfigError(f"unknown key {path}.{key}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{path}.{key} must be an object")
            merged[key] = _deep_merge(base[key], value, f"{path}.{key}")
        else:
            merged[key] = value
    return merged


def resolve_config(user_cfg):
    """Merge a user config over the defaults and sanity-check it."""
    if not isinstance(user_cfg, dict):
        raise ConfigError("config root must be a JSON object")
    if user_cfg.get("schema_version", 1) != 1:
        raise ConfigError("unsupported schema_version")
    cfg = _deep_merge(DEFAULT_CONFIG, user_cfg)
    if not isinstance(cfg["families"], list):
        raise ConfigError("families must be a list of descriptors")
    return cfg


def load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return resolve_config(json.load(fh))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}")


def _families(cfg, n_min):
    descs = cfg["families"]
    if len(descs) < n_min:
        raise ConfigError(f"this command needs at least {n_min} "
                          f"famil{'y' if n_min == 1 else 'ies'} in the config")
    try:
        return [build_family(d) for d in descs]
    except (UsageError, KeyError, TypeError) as e:
        raise ConfigError(f"bad family descriptor: {e}")


def _mc_params(cfg):
    mc = cfg["mc"]
    return MCParams(seed=cfg["master_seed"], n_bins=mc["n_bins"],
                    n_samples=mc["n_samples"], n_burn=mc["n_burn"],
                    n_alpha=mc["n_alpha"], m_max=mc["m_max"])


def _echo(cfg, payload):
    return {"config": cfg, "version": __version__, **payload}


def cmd_simulate(cfg, out_dir, threads=1):
    fam = _families(cfg, 1)[0]
    sim = cfg["simulate"]
    rng = np.random.default_rng([cfg["master_seed"] & (2 ** 63 - 1), 1])
    x = float(sim["x0"]) % 1.0
    rows = [(0, x)]
    for n in range(1, int(sim["n_steps"]) + 1):
        alpha = fam.noise.sample(rng)
        x = fam.eval_float(alpha, x)
        rows.append((n, x))
    write_csv(os.path.join(out_dir, "orbit.csv"), ["n", "x"], rows)
    log.info("wrote %s", os.path.join(out_dir, "orbit.csv"))
    return 0


def cmd_structure(cfg, out_dir, threads=1):
    fam = _families(cfg, 1)[0]
    params = _mc_params(cfg)
    structure = estimate_minimal_structure(fam, params)
    counts = estimate_stationary_histogram(
        fam, params.seed, params.n_burn, params.n_samples, params.n_bins)
    write_json(os.path.join(out_dir, "structure.json"),
               _echo(cfg, {"structure": structure.to_json_dict()}))
    write_csv(os.path.join(out_dir, "histogram.csv"),
              ["bin", "center", "count"],
              [(i, (i + 0.5) / params.n_bins, int(c)) for i, c in enumerate(counts)])
    return 0


def cmd_conjugacy(cfg, out_dir, threads=1):
    fam = _families(cfg, 1)[0]
    params = _mc_params(cfg)
    cj = cfg["conjugacy"]
    structure = estimate_minimal_structure(fam, params)
    target_cfg = cj["target"]
    if target_cfg == "auto":
        tk, tl = structure.k, structure.l
    else:
        tk, tl = int(target_cfg["k"]), int(target_cfg["l"])
    target = canonical(tk, tl)

    def run(half_width):
        window = NoiseWindow.generate(fam.noise, cfg["master_seed"],
                                      half_width=half_width)
        maps = build_conjugacy(fam, structure, window, int(cj["n_h"]),
                               n_subdiv=int(cj["subdiv"]))
        res = conjugation_residual(fam, target, window, maps.h0, maps.h1,
                                   int(cj["grid"]))
        return maps, res

    trend = []
    for hw in cj["trend_half_widths"]:
        _, res = run(int(hw))
        trend.append((int(hw), res))
    maps, residual = run(int(cfg["window"]["half_width"]))
    trend.append((int(cfg["window"]["half_width"]), residual))
    report = ConjugacyReport(
        target_k=tk, target_l=tl, seed=cfg["master_seed"],
        half_width=int(cfg["window"]["half_width"]), n_h=int(cj["n_h"]),
        node_count=maps.h0.node_count, residual_sup=residual,
        residual_trend=sorted(trend))
    write_json(os.path.join(out_dir, "conjugacy.json"),
               _echo(cfg, {"report": report.to_json_dict()}))
    write_csv(os.path.join(out_dir, "nodes.csv"), ["x", "y"], maps.h0.nodes())
    return 0


def cmd_classify(cfg, out_dir, threads=1):
    fams = _families(cfg, 2)
    cl = cfg["classifier"]
    params = ClassifierParams(
        seed=cfg["master_seed"], n_windows=int(cl["n_windows"]),
        n_pull=int(cl["n_pull"]), fit_tol=float(cl["fit_tol"]),
        no_floor_windows=int(cl["strict_no_floor"]),
        threads=threads, mc=_mc_params(cfg))
    verdict = classify_topological(fams[0], fams[1], params)
    write_json(os.path.join(out_dir, "verdict.json"),
               _echo(cfg, {"verdict": verdict.to_json_dict()}))
    with open(os.path.join(out_dir, "verdict.txt"), "w", encoding="utf-8",
              newline="\n") as fh:
        fh.write(verdict.summary_text())
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "structure": cmd_structure,
    "conjugacy": cmd_conjugacy,
    "classify": cmd_classify,
}


def _setup_logging():
    level = os.environ.get("RDS_CIRCLE_LOG", "warn").lower()
    levels = {"error": logging.ERROR, "warn": logging.WARNING,
              "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None):
    _setup_logging()
    parser = argparse.ArgumentParser(
        prog="rdscircle",
        description="simulate and classify random circle homeomorphisms")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="path to a JSON config")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config master seed")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads for window-parallel stages")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg["master_seed"] = int(args.seed)
        threads = max(1, args.threads) if args.threads else (os.cpu_count() or 1)
        out_dir = args.out or cfg["out_dir"]
        os.makedirs(out_dir, exist_ok=True)
        return COMMANDS[args.command](cfg, out_dir, threads)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (StructureEstimationError,) as e:
        print(f"structure estimation error: {e}", file=sys.stderr)
        return 3
    except ConjugacyConstructionError as e:
        print(f"conjugacy construction error: {e}", file=sys.stderr)
        return 4
    except (NumericError,) as e:
        print(f"numeric error: {e}", file=sys.stderr)
        return 5
    except RdsCircleError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
