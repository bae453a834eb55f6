"""Command-line experiment harness.

    irc-pareto region      per-channel rate regions and equilibrium points
    irc-pareto sumrate     mean maximum sum rate versus the relay budget
    irc-pareto fairness    mean proportional-fairness utility versus the relay
                           budget, plus a (P_s, P_r) sweep on one fixed channel
    irc-pareto feasibility neutralization feasibility reports

Configuration comes from an optional YAML file; command-line flags override
it.  Powers are given in dB and converted with ``10 ** (x / 10)``.  Channel
``i`` of a campaign is drawn from Philox4x64-10 keyed by ``(seed, i)`` (see
``channel.make_rng``), so results do not depend on the worker count.
"""

import argparse
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
import csv
import json
import math
import os
import sys

import numpy as np
import yaml

from .channel import ChannelRealization, draw_channel
from .neutralization import check_in_feasibility, feasibility_frontier, minimal_in_relay
from .pareto import (
    channel_regions,
    max_sum_rate,
    nash_equilibrium_rates,
    proportional_fairness,
)

ALL_MODES = ("ic", "general", "in")
CANONICAL_SEED = 0


@dataclass
class ExperimentConfig:
    K: int = 2
    M: int = 2
    p_s_max_db: object = 10.0
    p_r_max_db: object = 20.0
    grid_n: int = 20
    ic_grid_n: int = 101
    num_channels: int = 100
    seed: int = 0
    modes: tuple = ALL_MODES
    output_dir: str = "out"
    workers: int = 1
    refine_power: bool = False
    sweep_p_s_db: tuple = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0)
    sweep_p_r_db: tuple = (5.0, 10.0, 15.0, 20.0, 25.0)
    canonical_seed: int = CANONICAL_SEED

    def __post_init__(self):
        self.modes = tuple(self.modes)
        bad = [m for m in self.modes if m not in ALL_MODES]
        if bad or not self.modes:
            raise ValueError(f"modes must be a nonempty subset of {ALL_MODES}, got {self.modes}")
        if self.K < 2 or self.M < 1:
            raise ValueError("need K >= 2 users and M >= 1 relay antennas")
        if "in" in self.modes and self.K != self.M:
            raise ValueError("mode 'in' requires K == M")
        if self.grid_n < 2 or self.ic_grid_n < 2:
            raise ValueError("grid sizes must be >= 2")
        if self.num_channels < 1 or self.workers < 1:
            raise ValueError("num_channels and workers must be >= 1")
        for name in ("p_s_max_db", "p_r_max_db", "sweep_p_s_db", "sweep_p_r_db"):
            vals = _as_list(getattr(self, name))
            if not vals or not all(math.isfinite(float(v)) for v in vals):
                raise ValueError(f"{name} must be finite dB values")

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def snapshot(self):
        """Result-determining fields; output location and worker count are left out."""
        d = asdict(self)
        del d["output_dir"], d["workers"]
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d


def _as_list(x):
    return [float(v) for v in x] if isinstance(x, (list, tuple)) else [float(x)]


def db_to_linear(x_db):
    return 10.0 ** (float(x_db) / 10.0)


def _channels(cfg):
    return [draw_channel(cfg.K, cfg.M, cfg.seed, i) for i in range(cfg.num_channels)]


def _map(fn, jobs, workers):
    if workers == 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs, chunksize=1))


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(x) for x in row])


def _cell(x):
    if isinstance(x, (bool, np.bool_)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return "nan" if not math.isfinite(x) else repr(float(x))
    return x


def _write_json(path, obj):
    with open(path, "w") as f:
        json.dump(obj, f, sort_keys=True, indent=1)
        f.write("\n")


def _region_job(job):
    ch, ps_db, pr_db, cfg, idx = job
    regions, ne = channel_regions(ch, db_to_linear(ps_db), db_to_linear(pr_db), cfg.modes,
                                  cfg.grid_n, cfg.ic_grid_n, channel_id=idx,
                                  refine=cfg.refine_power)
    return regions, ne


# region ---------------------------------------------------------------------

def cmd_region(cfg):
    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    chans = _channels(cfg)
    written = []
    ne_rows = []
    for ps_db in _as_list(cfg.p_s_max_db):
        for pr_db in _as_list(cfg.p_r_max_db):
            jobs = [(ch, ps_db, pr_db, cfg, i) for i, ch in enumerate(chans)]
            for i, (regions, ne) in enumerate(_map(_region_job, jobs, cfg.workers)):
                tag = f"ps{ps_db:g}_pr{pr_db:g}_ch{i:03d}"
                for mode, region in regions.items():
                    base = os.path.join(out, f"region_{tag}_{mode}")
                    with open(base + ".csv", "w") as f:
                        f.write(region.to_csv())
                    _write_json(base + ".json", region.to_dict())
                    written += [base + ".csv", base + ".json"]
                ne_rows.append([ps_db, pr_db, i, *ne])
    K = cfg.K
    path = os.path.join(out, "ne_points.csv")
    _write_csv(path, ["p_s_db", "p_r_db", "channel"] + [f"rate_{j}" for j in range(1, K + 1)],
               ne_rows)
    written.append(path)
    for i, ch in enumerate(chans):
        path = os.path.join(out, f"channel_{i:03d}.json")
        _write_json(path, ch.to_dict())
        written.append(path)
    _write_json(os.path.join(out, "config.json"), cfg.snapshot())
    return written


# sumrate / fairness ------------------------------------------------------------

def _metrics_job(job):
    regions, ne = _region_job(job)
    row = {}
    for mode, region in regions.items():
        has = bool(region.feasible_points)
        row[mode] = {
            "sum_rate": max_sum_rate(region) if has else 0.0,
            "fairness": proportional_fairness(region, ne) if has else 0.0,
            "feasible": bool(region.diagnostics.get("in_feasible", True)) if mode == "in" else has,
        }
    return row


def _campaign(cfg, ps_db):
    """``{pr_db: [per-channel metric dicts]}`` over the configured relay budgets."""
    chans = _channels(cfg)
    res = {}
    for pr_db in _as_list(cfg.p_r_max_db):
        jobs = [(ch, ps_db, pr_db, cfg, i) for i, ch in enumerate(chans)]
        res[pr_db] = _map(_metrics_job, jobs, cfg.workers)
    return res


def _summaries(cfg, res, metric):
    raw, mean = [], []
    for pr_db, rows in res.items():
        for i, row in enumerate(rows):
            for mode in cfg.modes:
                raw.append([pr_db, i, mode, row[mode][metric], row[mode]["feasible"]])
        line = [pr_db]
        for mode in cfg.modes:
            line.append(float(np.mean([r[mode][metric] for r in rows])))
        if "in" in cfg.modes:
            line.append(float(np.mean([r["in"]["feasible"] for r in rows])))
        mean.append(line)
    header = ["p_r_db"] + [f"{m}_mean" for m in cfg.modes]
    if "in" in cfg.modes:
        header.append("in_feasible_fraction")
    return header, mean, raw


def cmd_sumrate(cfg):
    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    ps_db = _as_list(cfg.p_s_max_db)[0]
    res = _campaign(cfg, ps_db)
    header, mean, raw = _summaries(cfg, res, "sum_rate")
    p1, p2 = os.path.join(out, "sumrate.csv"), os.path.join(out, "sumrate_raw.csv")
    _write_csv(p1, header, mean)
    _write_csv(p2, ["p_r_db", "channel", "mode", "max_sum_rate", "feasible"], raw)
    _write_json(os.path.join(out, "config.json"), cfg.snapshot())
    return [p1, p2]


def cmd_fairness(cfg):
    if cfg.K != 2:
        raise ValueError("fairness experiments are defined for K = 2")
    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    ps_db = _as_list(cfg.p_s_max_db)[0]
    res = _campaign(cfg, ps_db)
    header, mean, raw = _summaries(cfg, res, "fairness")
    p1, p2 = os.path.join(out, "fairness.csv"), os.path.join(out, "fairness_raw.csv")
    _write_csv(p1, header, mean)
    _write_csv(p2, ["p_r_db", "channel", "mode", "fairness", "feasible"], raw)

    # two-dimensional sweep on the canonical channel
    ch = draw_channel(cfg.K, cfg.M, cfg.canonical_seed, 0)
    jobs = [(ch, ps, pr, cfg, 0) for ps in _as_list(cfg.sweep_p_s_db)
            for pr in _as_list(cfg.sweep_p_r_db)]
    rows = []
    for (_, ps, pr, _, _), row in zip(jobs, _map(_metrics_job, jobs, cfg.workers)):
        for mode in cfg.modes:
            rows.append([ps, pr, mode, row[mode]["sum_rate"], row[mode]["fairness"],
                         row[mode]["feasible"]])
    p3 = os.path.join(out, "fairness_2d.csv")
    _write_csv(p3, ["p_s_db", "p_r_db", "mode", "max_sum_rate", "fairness", "feasible"], rows)
    written = [p1, p2, p3]
    if cfg.K == cfg.M:
        frontier = []
        for pr in _as_list(cfg.sweep_p_r_db):
            ps_star = feasibility_frontier(ch, db_to_linear(pr))
            frontier.append([pr, float("nan") if ps_star is None else
                             (10.0 * math.log10(ps_star) if ps_star > 0 else -math.inf)])
        p4 = os.path.join(out, "in_frontier.csv")
        _write_csv(p4, ["p_r_db", "p_s_frontier_db"], frontier)
        written.append(p4)
    _write_json(os.path.join(out, "channel_canonical.json"), ch.to_dict())
    _write_json(os.path.join(out, "config.json"), cfg.snapshot())
    return written


# feasibility ---------------------------------------------------------------------

def feasibility_report(ch, p_s_max, p_r_max):
    p = np.full(ch.K, float(p_s_max))
    rep = check_in_feasibility(ch, p, p_r_max)
    d = {
        "min_power": rep.min_power,
        "budget": rep.budget,
        "feasible": rep.feasible,
        "p": [float(x) for x in p],
        "relay": None,
    }
    if rep.feasible:
        _, R = minimal_in_relay(rep, ch)
        d["relay"] = [[[float(z.real), float(z.imag)] for z in row] for row in R]
    return d


def cmd_feasibility(cfg, channel_file=None):
    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    if channel_file:
        with open(channel_file) as f:
            chans = [ChannelRealization.from_json(f.read())]
    else:
        chans = _channels(cfg)
    reports = []
    for i, ch in enumerate(chans):
        for ps_db in _as_list(cfg.p_s_max_db):
            for pr_db in _as_list(cfg.p_r_max_db):
                rep = feasibility_report(ch, db_to_linear(ps_db), db_to_linear(pr_db))
                rep.update({"channel": i, "p_s_db": ps_db, "p_r_db": pr_db})
                reports.append(rep)
    path = os.path.join(out, "feasibility.json")
    _write_json(path, {"reports": reports})
    return [path]


# entry point ---------------------------------------------------------------------

def _parser():
    ap = argparse.ArgumentParser(prog="irc-pareto", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("region", "sumrate", "fairness", "feasibility"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="YAML configuration file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", dest="output_dir")
        sp.add_argument("--modes", help="comma-separated subset of ic,general,in")
        sp.add_argument("--grid-n", dest="grid_n", type=int)
        sp.add_argument("--channels", dest="num_channels", type=int)
        sp.add_argument("--ps-db", dest="p_s_max_db", type=float, nargs="+")
        sp.add_argument("--pr-db", dest="p_r_max_db", type=float, nargs="+")
        sp.add_argument("--workers", type=int)
        if name == "feasibility":
            sp.add_argument("--channel-file", help="channel JSON (as written by region)")
    return ap


def load_config(args):
    d = {}
    if args.config:
        with open(args.config) as f:
            d = yaml.safe_load(f) or {}
        if not isinstance(d, dict):
            raise ValueError(f"{args.config}: expected a mapping at top level")
    for key in ("seed", "output_dir", "grid_n", "num_channels", "workers"):
        v = getattr(args, key)
        if v is not None:
            d[key] = v
    for key in ("p_s_max_db", "p_r_max_db"):
        v = getattr(args, key)
        if v is not None:
            d[key] = v[0] if len(v) == 1 else list(v)
    if args.modes:
        d["modes"] = [m.strip() for m in args.modes.split(",") if m.strip()]
    return ExperimentConfig.from_dict(d)


COMMANDS = {"region": cmd_region, "sumrate": cmd_sumrate, "fairness": cmd_fairness}


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args)
        if args.command == "feasibility":
            written = cmd_feasibility(cfg, args.channel_file)
        else:
            written = COMMANDS[args.command](cfg)
    except (OSError, ValueError, yaml.YAMLError) as exc:
        where = f" ({exc.filename})" if getattr(exc, "filename", None) else ""
        print(f"irc-pareto {args.command}: error{where}: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
