"""``dldo`` command-line front end.

Every subcommand writes its tables to ``--out`` (CSV, or JSON with
``--format json``) plus a ``summary.json`` echoing the resolved config and the
key results.  Exit status: 0 on success, 1 on a validation error, 2 on a
numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any

from .config import Config, grid_values, load_config
from .design import EdgeMode, NumericalError, ValidationError
from .explorer import (
    report_recommendation,
    run_sweep,
    stability_map,
    write_records_csv,
)
from .limitcycle import design_mode_map
from .linmodel import build_model, closed_loop_poles, jury_stable, root_locus
from .loopsim import simulate
from .metrics import measure

def _finite_or_none(x: float | None) -> float | None:
    """JSON has no inf/NaN; such values are written as null."""
    if x is None or (isinstance(x, float) and not math.isfinite(x)):
        return None
    return x


def _clean(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, float):
        return _finite_or_none(obj)
    return obj


def _dump_json(path: Path, obj: Any) -> None:
    path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n")


class Output:
    def __init__(self, out_dir: str, fmt: str):
        self.dir = Path(out_dir)
        self.fmt = fmt
        self.files: list[str] = []

    def table(self, stem: str, header: Sequence[str], records: list[dict[str, Any]]) -> None:
        self.dir.mkdir(parents=True, exist_ok=True)
        if self.fmt == "json":
            name = f"{stem}.json"
            _dump_json(self.dir / name, [{h: r.get(h) for h in header} for r in records])
        else:
            name = f"{stem}.csv"
            write_records_csv(self.dir / name, header, records)
        self.files.append(name)

    def summary(self, command: str, cfg: Config, results: dict[str, Any]) -> None:
        self.dir.mkdir(parents=True, exist_ok=True)
        _dump_json(self.dir / "summary.json", {
            "command": command, "config": cfg.to_dict(), "results": results,
            "files": sorted(self.files)})


def cmd_poles(args, cfg: Config, out: Output) -> dict:
    model = build_model(cfg.design)
    poles = closed_loop_poles(model)
    out.table("poles", ["index", "real", "imag", "abs"],
              [{"index": i, "real": p.real, "imag": p.imag, "abs": abs(p)}
               for i, p in enumerate(poles)])
    return {"model": model.to_dict(), "fs_ratio": model.fs_ratio,
            "fs_ratio_hz": model.fs_ratio_hz, "jury_stable": jury_stable(model),
            "poles": [[p.real, p.imag] for p in poles]}


def cmd_locus(args, cfg: Config, out: Output) -> dict:
    model = build_model(cfg.design)
    k_max = args.k_max if args.k_max is not None else float(cfg.sweep["k_max"])
    steps = args.steps if args.steps is not None else int(cfg.sweep["steps"])
    locus = root_locus(model, k_max, steps)
    out.table("locus", ["k_loop", "pole1_real", "pole1_imag", "pole2_real", "pole2_imag"],
              [{"k_loop": k, "pole1_real": p1.real, "pole1_imag": p1.imag,
                "pole2_real": p2.real, "pole2_imag": p2.imag} for k, p1, p2 in locus.points])
    return {"alpha": locus.alpha, "k_breakaway": locus.k_breakaway,
            "k_unstable": locus.k_unstable, "breakaway_point": locus.breakaway_point,
            "k_loop_design": model.k_loop}


def cmd_simulate(args, cfg: Config, out: Output) -> dict:
    trace = simulate(cfg.scenario)
    metrics = measure(trace, cfg.design)
    for name in ("t_rise", "overshoot_fraction", "ripple_pp", "activity_per_second", "v_final"):
        v = getattr(metrics, name)
        if v is not None and not math.isfinite(v):
            raise NumericalError(f"non-finite metric {name} = {v}")
    out.table("trace", ["t_s", "v_out_V", "d_word", "comparator"],
              [{"t_s": t, "v_out_V": v, "d_word": d, "comparator": c}
               for t, v, d, c in zip(trace.t.tolist(), trace.v_out.tolist(),
                                     trace.d_word.tolist(), trace.comparator.tolist())])
    out.table("dense", ["t_s", "v_out_V"],
              [{"t_s": t, "v_out_V": v}
               for t, v in zip(trace.dense_t.tolist(), trace.dense_v.tolist())])
    return {"metrics": metrics.to_dict(), "activity": trace.activity}


def _edge_modes(args, cfg: Config) -> list[EdgeMode]:
    names = [args.edge_mode] if args.edge_mode else cfg.sweep["edge_modes"]
    try:
        return [EdgeMode(n) for n in names]
    except ValueError as exc:
        raise ValidationError(str(exc), "edge_mode") from None


def cmd_modes(args, cfg: Config, out: Output) -> dict:
    ratios = grid_values(cfg.sweep["ratios"])
    n_max = args.n_max if args.n_max is not None else int(cfg.sweep["n_max"])
    header = ["ratio", "edge_mode", "n", "exists", "phi_deg", "amplitude_V", "gain_db"]
    mode_rows: list[dict] = []
    summary_rows: list[dict] = []
    results: dict[str, Any] = {}
    for em in _edge_modes(args, cfg):
        mm = design_mode_map(cfg.design, ratios, n_max, em, vary=cfg.sweep["vary"],
                             scenario=cfg.scenario, with_simulation=args.simulate)
        sims = mm.simulated or [None] * len(ratios)
        for ratio, preds, mx, sim in zip(mm.ratio_grid, mm.predictions, mm.max_mode, sims):
            for p in preds:
                mode_rows.append(dict(zip(header, p.to_row(ratio, em))))
            summary_rows.append({"ratio": ratio, "edge_mode": em.value,
                                 "max_mode_predicted": mx,
                                 "mode_simulated": None if sim is None else str(sim)})
        results[em.value] = {"max_mode": mm.max_mode,
                             "bands": {str(n): mm.band(n) for n in range(1, n_max + 1)
                                       if mm.band(n) is not None}}
    for r in mode_rows:
        r["exists"] = r["exists"] == "true"
    out.table("modes", header, mode_rows)
    out.table("modes_summary", ["ratio", "edge_mode", "max_mode_predicted", "mode_simulated"],
              summary_rows)
    return results


def cmd_sweep(args, cfg: Config, out: Output) -> dict:
    result = run_sweep(cfg.sweep_spec())
    out.table("sweep", result.header(), result.records())
    return {"rows": len(result.rows), "invalid_rows": sum(not r.valid for r in result.rows)}


def cmd_stability_map(args, cfg: Config, out: Output) -> dict:
    levels = cfg.sweep.get("levels")
    smap = stability_map(cfg.sweep_spec(two_axes=True), levels)
    out.table("stability_map", smap.result.header(), smap.result.records())
    out.table("contours", smap.contour_header(), smap.contour_records())
    return {"cells": int(smap.stable.size), "stable_cells": int(smap.stable.sum()),
            "levels": [c.level for c in smap.contours],
            "contour_lines": sum(len(c.lines) for c in smap.contours)}


def cmd_recommend(args, cfg: Config, out: Output) -> dict:
    # the window is one-dimensional in fs/F1; a configured axis2 is ignored
    result = run_sweep(dataclasses.replace(cfg.sweep_spec(), axis2=None))
    rec = report_recommendation(result, cfg.sweep["weights"], float(cfg.sweep["tolerance"]))
    out.table("sweep", result.header(), result.records())
    out.table("recommendation", ["fs_ratio", "score"],
              [{"fs_ratio": r, "score": s} for r, s in zip(rec.ratios, rec.scores)])
    return {"recommendation": rec.to_dict()}


COMMANDS = {
    "poles": (cmd_poles, "closed-loop poles and linearized model"),
    "locus": (cmd_locus, "root locus over the loop gain"),
    "simulate": (cmd_simulate, "nonlinear simulation of the configured scenario"),
    "modes": (cmd_modes, "describing-function limit-cycle mode map"),
    "sweep": (cmd_sweep, "parameter sweep of the transient metrics"),
    "stability-map": (cmd_stability_map, "stability map with iso-rise-time contours"),
    "recommend": (cmd_recommend, "recommended fs/F1 window"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="JSON config file")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
    common.add_argument("--format", choices=("csv", "json"), default=argparse.SUPPRESS,
                        help="table format (default csv)")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="dldo", parents=[common],
                                     description="Digital LDO regulator modeling lab.")
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {name: sub.add_parser(name, parents=[common], help=text)
            for name, (_, text) in COMMANDS.items()}
    subs["locus"].add_argument("--k-max", type=float, default=None)
    subs["locus"].add_argument("--steps", type=int, default=None)
    subs["modes"].add_argument("--n-max", type=int, default=None)
    subs["modes"].add_argument("--edge-mode", choices=[e.value for e in EdgeMode], default=None)
    subs["modes"].add_argument("--simulate", action="store_true",
                               help="cross-check every ratio with loop-sim")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler, _ = COMMANDS[args.command]
    try:
        cfg = load_config(getattr(args, "config", None))
        out = Output(getattr(args, "out", "."), getattr(args, "format", "csv"))
        results = handler(args, cfg, out)
        out.summary(args.command, cfg, results)
    except ValidationError as exc:
        print(f"dldo: validation error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, FloatingPointError, OverflowError) as exc:
        print(f"dldo: numerical failure: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
