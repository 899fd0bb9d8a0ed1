"""Command-line entry point: ``qclob {replay,stats,fit,collapse,generate}``.

Exit codes: 0 success, 2 usage error, 3 unreadable or invalid input,
4 internal error, 5 empty session.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import analytics as an
from . import report
from .coordinates import Frame
from .ingest import ParseError, SessionConfig, load_session, read_tick_file, read_trade_file, replay
from .models.distance import ECDF
from .models.fit import FitError, fit_gent, qq_table
from .models.semiparam import CollapseError, TrimError, collapse_ratio
from .simgen import GeneratorSpec, SpecError, generate_session

log = logging.getLogger("qclob")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_INTERNAL = 4
EXIT_EMPTY = 5


class UsageError(Exception):
    pass


class EmptySession(Exception):
    pass


# -- inputs -------------------------------------------------------------


def _config(args):
    return SessionConfig.load(args.config) if args.config else None


def _load_one(item):
    path, cfg = item
    return load_session(path, cfg)


def load_inputs(args) -> list:
    """Replayed sessions from ``--ticks/--trades`` or session directories."""
    cfg = _config(args)
    if args.ticks or args.trades:
        if not (args.ticks and args.trades):
            raise UsageError("--ticks and --trades must be given together")
        if args.sessions:
            raise UsageError("give either session directories or --ticks/--trades, not both")
        ticks = read_tick_file(args.ticks)
        trades = read_trade_file(args.trades)
        return [replay(ticks, trades, cfg or SessionConfig(), label=Path(args.ticks).stem)]
    if not args.sessions:
        raise UsageError("no input sessions given")
    for p in args.sessions:
        if not Path(p).is_dir():
            raise UsageError(f"not a session directory: {p}")
    items = [(p, cfg) for p in args.sessions]
    if args.jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            return list(pool.map(_load_one, items))
    return [_load_one(it) for it in items]


def _frames(args) -> list:
    return [Frame.QUOTE, Frame.TRADE] if args.frame == "both" else [Frame(args.frame)]


def _flows(args) -> list:
    return list(an.FLOWS) if args.flow == "all" else [args.flow]


def _label(session, k: int) -> str:
    return session.label or f"session_{k:02d}"


# -- subcommands ----------------------------------------------------------


def cmd_replay(args) -> int:
    sessions = load_inputs(args)
    out = Path(args.out)
    empty = []
    for k, s in enumerate(sessions):
        d = out / _label(s, k)
        report.write_json(d / "summary.json", s.summary())
        act = an.activity_summary(s)
        report.write_record(d, "activity", act.as_dict())
        report.write_record(d, "spread", an.spread_stats(s.quotes, s.start_ms, s.end_ms).as_dict())
        for name, recs in (("limits", s.arrivals), ("cancels", s.cancellations), ("market", s.market_orders)):
            sizes = [r.size for r in recs]
            rows = []
            if sizes:
                e = an.size_ecdf(sizes)
                rows = list(zip(e.x.astype(int).tolist(), e.p.tolist()))
            report.write_table(d, f"size_ecdf_{name}", ("size_lots", "ecdf"), rows, {"empty": not sizes})
        if s.empty:
            empty.append(_label(s, k))
    if empty:
        log.error("empty session(s): %s", ", ".join(empty))
        return EXIT_EMPTY
    return EXIT_OK


def _stats_one(s, d: Path, frames, flows, weighting: str) -> None:
    for frame in frames:
        dists = {}
        for flow in flows:
            rd = an.relative_distribution(s, frame, flow, weighting)
            dists[flow] = rd
            meta = {"frame": frame.value, "flow": flow, "day": rd.day, "empty": rd.empty, "n": rd.n}
            rows = []
            if not rd.empty:
                e = rd.ecdf()
                rows = list(zip(rd.ticks.tolist(), rd.mass.tolist(), rd.density.tolist(),
                                e.p.tolist(), (1.0 - e.p).tolist()))
                try:
                    m, sd = rd.trimmed_moments(s.config.trim_ticks, s.config.trim_percentile)
                    meta.update(trimmed_mean=m, trimmed_std=sd)
                except TrimError:
                    meta.update(trimmed_mean=None, trimmed_std=None)
            report.write_table(d, f"dist_{frame.value}_{flow}",
                               ("tick", "mass", "density", "ecdf", "survivor"), rows, meta)
            srows = []
            if not rd.empty:
                f, mag = an.magnitude_spectrum(rd)
                srows = list(zip(f.tolist(), mag.tolist()))
            report.write_table(d, f"spectrum_{frame.value}_{flow}", ("frequency", "magnitude"), srows,
                               {"frame": frame.value, "flow": flow, "empty": rd.empty})
        if "cancels" in dists and "depth" in dists:
            ratio = an.cancellation_ratio(dists["cancels"], dists["depth"])
            report.write_table(d, f"cancel_ratio_{frame.value}", ("tick", "ratio"), sorted(ratio.items()),
                               {"frame": frame.value, "empty": not ratio,
                                "mean_ratio": float(np.mean(list(ratio.values()))) if ratio else None})
    h = an.queue_consumptions(s.market_orders)
    hrows = []
    if h.size:
        e = ECDF(h)
        hrows = list(zip(e.x.tolist(), e.p.tolist()))
    report.write_table(d, "hx_ecdf", ("h", "ecdf"), hrows, {"empty": h.size == 0})
    try:
        deciles = an.size_vs_queue_deciles(s.market_orders)
        report.write_table(d, "size_vs_queue_deciles", ("decile", "count", "mean_queue", "mean_size"),
                           [(r.decile, r.count, r.mean_queue, r.mean_size) for r in deciles],
                           {"empty": False})
    except ValueError as exc:
        report.write_table(d, "size_vs_queue_deciles", ("decile", "count", "mean_queue", "mean_size"), [],
                           {"empty": True, "error": str(exc)})


def cmd_stats(args) -> int:
    sessions = load_inputs(args)
    out = Path(args.out)
    for k, s in enumerate(sessions):
        _stats_one(s, out / _label(s, k), _frames(args), _flows(args), args.weighting)
    return EXIT_EMPTY if all(s.empty for s in sessions) else EXIT_OK


def cmd_fit(args) -> int:
    sessions = load_inputs(args)
    out = Path(args.out)
    items = []
    for k, s in enumerate(sessions):
        label = _label(s, k)
        for frame in _frames(args):
            for flow in _flows(args):
                rd = an.relative_distribution(s, frame, flow, args.weighting)
                entry = {"day": label, "frame": frame.value, "flow": flow}
                try:
                    if rd.empty:
                        raise FitError("empty distribution")
                    sample = ECDF.from_histogram(rd.ticks, rd.mass, n=rd.n)
                    res = fit_gent(sample, trim=s.config.trim_ticks)
                    entry.update(res.as_dict())
                    entry.pop("seconds", None)
                    qq = qq_table(sample, res.params)
                    report.write_table(out / label, f"qq_{frame.value}_{flow}",
                                       ("percentile", "empirical", "model"),
                                       [(r["percentile"], r["empirical"], r["model"]) for r in qq])
                except FitError as exc:
                    entry["error"] = str(exc)
                items.append(entry)
                report.write_json(out / label / f"fit_{frame.value}_{flow}.json", entry)
    report.write_json(out / "fit_report.json", {"fits": items})
    return EXIT_OK


def cmd_collapse(args) -> int:
    sessions = load_inputs(args)
    if len(sessions) < 2:
        raise UsageError("collapse needs at least two sessions")
    out = Path(args.out)
    trim = sessions[0].config.trim_ticks
    pct = sessions[0].config.trim_percentile
    labels = [_label(s, k) for k, s in enumerate(sessions)]
    for kind in args.distance or ["cvm"]:
        table, details = {}, []
        for frame in _frames(args):
            for flow in _flows(args):
                days, skipped = {}, []
                for label, s in zip(labels, sessions):
                    rd = an.relative_distribution(s, frame, flow, args.weighting)
                    if rd.empty:
                        skipped.append(label)
                        continue
                    days[label] = ECDF.from_histogram(rd.ticks, rd.mass, n=rd.n)
                cell = {"frame": frame.value, "flow": flow, "skipped_days": skipped}
                try:
                    rep = collapse_ratio(days, kind, trim, pct)
                    cell.update(rep.as_dict())
                except (CollapseError, TrimError) as exc:
                    cell.update(mean_ratio=None, error=str(exc))
                table.setdefault(frame.value, {})[flow] = cell["mean_ratio"]
                details.append(cell)
        report.write_json(out / f"collapse_{kind}.json", {"distance": kind, "table": table, "cells": details})
        flows = _flows(args)
        report.write_csv(out / f"collapse_{kind}.csv", ["frame"] + flows,
                         [[f] + [table[f].get(fl) for fl in flows] for f in table])
    return EXIT_OK


def cmd_generate(args) -> int:
    spec = GeneratorSpec.load(args.spec) if args.spec else GeneratorSpec()
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    if args.mode is not None:
        spec = replace(spec, mode=args.mode)
    out = Path(args.out)
    for day in range(args.days):
        generate_session(spec, day).write(out / f"day_{day:02d}")
    report.write_json(out / "spec.json", spec.to_dict())
    return EXIT_OK


# -- parser ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qclob", description="QCLOB replay, statistics and models")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def inputs(p):
        p.add_argument("sessions", nargs="*", help="session directories with ticks.csv and trades.csv")
        p.add_argument("--ticks", help="tick file (with --trades, instead of directories)")
        p.add_argument("--trades", help="trade file")
        p.add_argument("--config", help="session config file (key=value)")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for loading sessions")

    def selection(p):
        p.add_argument("--frame", choices=("quote", "trade", "both"), default="both")
        p.add_argument("--flow", choices=("limits", "cancels", "depth", "all"), default="all")
        p.add_argument("--weighting", choices=("size", "count"), default="size")
        p.add_argument("--seed", type=int, default=None, help="accepted for uniformity; analyses are deterministic")

    p = sub.add_parser("replay", help="rebuild sessions and write activity/spread summaries")
    inputs(p)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("stats", help="relative-price distributions, spectra, ratios")
    inputs(p)
    selection(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("fit", help="generalized t fits per day/frame/flow")
    inputs(p)
    selection(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("collapse", help="mean distance ratios across days")
    inputs(p)
    selection(p)
    p.add_argument("--distance", choices=("cvm", "ks"), action="append")
    p.set_defaults(func=cmd_collapse)

    p = sub.add_parser("generate", help="write synthetic sessions")
    p.add_argument("--spec", help="generator spec (JSON)")
    p.add_argument("--days", type=int, default=1)
    p.add_argument("--out", default="out")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--mode", choices=("centralized", "qclob"), default=None)
    p.set_defaults(func=cmd_generate)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if getattr(args, "jobs", 1) < 1 or (args.command == "generate" and args.days < 1):
            raise UsageError("--jobs and --days must be >= 1")
        return args.func(args)
    except UsageError as exc:
        print(f"qclob: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, SpecError) as exc:
        print(f"qclob: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (OSError, UnicodeDecodeError) as exc:
        print(f"qclob: cannot read input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        print(f"qclob: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
