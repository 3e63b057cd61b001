"""Run artifacts: per-tick CSV, events as JSON lines, an SVG trajectory plot, a JSON summary.

CSV columns (stable order): ``tick, time, x, y, theta, v, omega, battery,
meter, d_o, ir_min, station, mp_ctlr, nav_mode, target_x, target_y, FE, E_req,
es_ok, cf_ok, visited, events``.  ``meter`` is cumulative energy drawn,
``E_req`` the energy needed to return to the last station (blank in MC runs),
``events`` the ``;``-joined event names of that tick.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

from .properties import CSV_COLUMNS, RunResult

BACKTRACK_MODES = {"turn_180", "backtrack", "backtrack_done"}


def _fmt(v):
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return v


def write_csv(records, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow([_fmt(r[c]) for c in CSV_COLUMNS])
    return path


def write_events(events, path) -> Path:
    path = Path(path)
    with path.open("w") as fh:
        for ev in events:
            fh.write(json.dumps(ev, default=str, sort_keys=True) + "\n")
    return path


def _segments(records):
    """Split the trajectory into runs of forward (AC) and backtrack (BC) motion."""
    runs, cur, kind = [], [], None
    for r in records:
        k = "back" if r["nav_mode"] in BACKTRACK_MODES else "fwd"
        if k != kind and cur:
            runs.append((kind, cur))
            cur = [cur[-1]]
        kind = k
        cur.append((r["x"], r["y"]))
    if cur:
        runs.append((kind, cur))
    return runs


def render_svg(result: RunResult, size: int = 640) -> str:
    s = result.scenario
    pts = [(r["x"], r["y"]) for r in result.records]
    pts += [p for poly in s.obstacles for p in poly]
    pts += [ps.location for ps in s.stations] + list(s.targets) + [s.start[:2]]
    xs, ys = [p[0] for p in pts], [p[1] for p in pts]
    pad = 0.15
    x0, x1, y0, y1 = min(xs) - pad, max(xs) + pad, min(ys) - pad, max(ys) + pad
    scale = size / max(x1 - x0, y1 - y0)
    w, h = (x1 - x0) * scale, (y1 - y0) * scale

    def tx(p):
        return f"{(p[0] - x0) * scale:.2f},{(y1 - p[1]) * scale:.2f}"

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0f}" height="{h:.0f}" '
           f'viewBox="0 0 {w:.2f} {h:.2f}">', '<rect width="100%" height="100%" fill="white"/>']
    for poly in s.obstacles:
        out.append(f'<polygon points="{" ".join(tx(p) for p in poly)}" fill="#999" stroke="#444"/>')
    for kind, run in _segments(result.records):
        if len(run) < 2:
            continue
        color, width = ("red", 2.0) if kind == "back" else ("black", 1.5)
        out.append(f'<polyline points="{" ".join(tx(p) for p in run)}" fill="none" stroke="{color}" '
                   f'stroke-width="{width}"/>')
    r_ps = s.plant.ps_detect_range * scale
    for k, ps in enumerate(s.stations, 1):
        cx, cy = tx(ps.location).split(",")
        out.append(f'<circle cx="{cx}" cy="{cy}" r="{r_ps:.2f}" fill="none" stroke="green" stroke-dasharray="3,2"/>')
        out.append(f'<circle cx="{cx}" cy="{cy}" r="4" fill="green"/>')
        out.append(f'<text x="{float(cx) + 6:.2f}" y="{float(cy) - 6:.2f}" font-size="12">PS{k}</text>')
    for k, t in enumerate(s.targets, 1):
        cx, cy = (float(c) for c in tx(t).split(","))
        out.append(f'<path d="M{cx - 5:.2f},{cy - 5:.2f} L{cx + 5:.2f},{cy + 5:.2f} M{cx - 5:.2f},{cy + 5:.2f} '
                   f'L{cx + 5:.2f},{cy - 5:.2f}" stroke="blue" stroke-width="2"/>')
        out.append(f'<text x="{cx + 6:.2f}" y="{cy - 6:.2f}" font-size="12" fill="blue">T{k}</text>')
    for ep in result.episodes:
        cx, cy = tx(ep.switch_pos).split(",")
        out.append(f'<circle cx="{cx}" cy="{cy}" r="3" fill="red"/>')
        out.append(f'<text x="{float(cx) + 6:.2f}" y="{float(cy) + 12:.2f}" font-size="11" fill="red">'
                   f'BT (B={ep.battery_at_switch:.2f})</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def summary(result: RunResult) -> dict:
    return {
        "scenario": result.scenario.name,
        "mode": result.scenario.mode,
        "ticks": result.ticks,
        "completed": result.completed,
        "aborted": result.aborted,
        "targets_reached": [{"target": k, "tick": t} for k, t in result.visits],
        "switches": [{"tick": t, "from": a, "to": b} for t, a, b in result.switches],
        "violations": [{"prop": v.prop, "tick": v.tick, "message": v.message} for v in result.violations],
        "episodes": [{"switch_tick": e.switch_tick, "switch_pos": list(e.switch_pos),
                      "battery_at_switch": e.battery_at_switch, "fe_at_switch": e.fe_at_switch,
                      "be_measured": e.be_measured, "arrival_battery": e.arrival_battery,
                      "max_deviation": e.max_deviation} for e in result.episodes],
        "legs": [{"leg": l.leg, "bound": l.bound, "measured": l.measured} for l in result.legs],
        "case_counts": result.case_counts,
    }


def emit_outputs(result: RunResult, out_dir, plot: bool = True) -> dict[str, Path]:
    """Write the trace CSV; unless ``plot`` is off, also events, SVG and summary."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {"csv": write_csv(result.records, out / "trace.csv")}
    if not plot:
        return files
    files["events"] = write_events(result.events, out / "events.jsonl")
    p = out / "trajectory.svg"
    p.write_text(render_svg(result))
    files["svg"] = p
    p = out / "summary.json"
    p.write_text(json.dumps(summary(result), indent=2, default=str) + "\n")
    files["summary"] = p
    return files
