"""Score tables, ranking-correlation CSV and static SVG plots for a run directory."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .explain import Explanation, summary_ranking, waterfall_data
from .metrics import SCORE_CSV_FIELDS

log = logging.getLogger(__name__)

TOP_K = 10
_LOW, _HIGH = (30, 136, 229), (255, 13, 87)


def _csv(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def scores_csv(scores: dict) -> str:
    rows = [["cohort", *SCORE_CSV_FIELDS, "NIR", "n"]]
    for name, s in scores.items():
        vals = [s["acc"], s["bacc"], s["auroc"], s["f1_macro"], s["mcc"], s["no_information_rate"]]
        rows.append([name, *(f"{v:.6f}" for v in vals), s["n"]])
    return _csv(rows)


def kendall_csv(kendall: dict) -> str:
    labels = kendall["labels"]
    rows = [["method", *labels]]
    for lab, row in zip(labels, kendall["tau"]):
        rows.append([lab, *("" if v is None else f"{v:.6f}" for v in row)])
    return _csv(rows)


def jitter(subject_id: str, amplitude: float) -> float:
    """Deterministic offset in ``[-amplitude, amplitude]`` from the subject ID."""
    h = int.from_bytes(hashlib.sha256(str(subject_id).encode()).digest()[:8], "little")
    return (h / 2**64 * 2 - 1) * amplitude


def _color(t: float) -> str:
    if math.isnan(t):
        return "#999999"
    rgb = [round(a + (b - a) * t) for a, b in zip(_LOW, _HIGH)]
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def summary_svg(explanations, top_k: int = TOP_K) -> str:
    """Jittered scatter of contributions, one row per top feature.

    Points are coloured by the feature value's rank within its row (blue low,
    red high); grouped players have no single value and are grey.
    """
    s = summary_ranking(explanations)
    feats = s.top(top_k)
    lim = max((abs(p) for f in feats for p, _ in s.points[f]), default=1.0) or 1.0
    left, width, row_h, top = 170, 440, 28, 20
    height = top + row_h * len(feats) + 40
    x = lambda v: left + width / 2 + v / lim * width / 2  # noqa: E731
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{left + width + 20}" height="{height}" '
           f'font-family="sans-serif" font-size="11">',
           f'<line x1="{x(0):.2f}" y1="{top}" x2="{x(0):.2f}" y2="{top + row_h * len(feats)}" stroke="#888"/>']
    for r, f in enumerate(feats):
        cy = top + row_h * r + row_h / 2
        out.append(f'<text x="{left - 8}" y="{cy + 4:.2f}" text-anchor="end">{escape(f)}</text>')
        pts = s.points[f]
        vals = np.array([v for _, v in pts], dtype=float)
        ranks = np.full(len(vals), np.nan)
        ok = ~np.isnan(vals)
        if ok.sum() > 1:
            order = vals[ok].argsort().argsort()
            ranks[ok] = order / (ok.sum() - 1)
        for (phi, _), t, sid in zip(pts, ranks, s.subject_ids):
            cyj = cy + jitter(f"{f}/{sid}", row_h * 0.35)
            out.append(f'<circle class="pt" cx="{x(phi):.2f}" cy="{cyj:.2f}" r="2.5" fill="{_color(t)}"/>')
    out.append(f'<text x="{left + width / 2}" y="{height - 12}" text-anchor="middle">SHAP value</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def waterfall_svg(explanation: Explanation, top_k: int = TOP_K) -> str:
    """Bars from the base value to the prediction, largest contributions first;
    the remaining players are collapsed into one bar."""
    w = waterfall_data(explanation)
    bars = list(w.bars[:top_k])
    if len(w.bars) > top_k:
        rest = w.bars[top_k:]
        bars.append(type(rest[0])(f"{len(rest)} other features", math.nan, sum(b.phi for b in rest),
                                  rest[0].start, rest[-1].end))
    ends = [w.base_value] + [b.start for b in bars] + [b.end for b in bars]
    lo, hi = min(ends), max(ends)
    span = (hi - lo) or 1.0
    left, width, row_h, top = 200, 400, 24, 30
    x = lambda v: left + (v - lo) / span * width  # noqa: E731
    height = top + row_h * len(bars) + 40
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{left + width + 80}" height="{height}" '
           f'font-family="sans-serif" font-size="11">',
           f'<text x="{left}" y="16">f(x) = {w.prediction:.3f}</text>']
    for r, b in enumerate(bars):
        y0 = top + row_h * r
        a, c = sorted((x(b.start), x(b.end)))
        fill = "#ff0d57" if b.phi > 0 else "#1e88e5"
        label = b.feature if math.isnan(b.value) else f"{b.feature} = {b.value:.3g}"
        out.append(f'<text x="{left - 8}" y="{y0 + 16}" text-anchor="end">{escape(label)}</text>')
        out.append(f'<rect class="bar" x="{a:.2f}" y="{y0 + 4}" width="{max(c - a, 0.5):.2f}" '
                   f'height="{row_h - 8}" fill="{fill}"/>')
        out.append(f'<text x="{c + 4:.2f}" y="{y0 + 16}">{b.phi:+.3f}</text>')
    out.append(f'<text x="{left}" y="{height - 12}">E[f(X)] = {w.base_value:.3f}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _safe(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_" else "_" for ch in str(name))


def emit_reports(run_dir, formats=("csv", "svg"), waterfall_subjects=None) -> list[Path]:
    """Render tables and plots from the JSON artifacts in ``run_dir``.

    ``waterfall_subjects`` defaults to the list in the run's config copy
    (``config.json``) when present.
    """
    run_dir = Path(run_dir)
    report = json.loads((run_dir / "report.json").read_text(encoding="utf-8"))
    written = []

    def put(name, text):
        p = run_dir / name
        p.write_text(text, encoding="utf-8")
        written.append(p)

    if "csv" in formats:
        put("scores.csv", scores_csv(report["scores"]))
        if report.get("kendall"):
            put("kendall.csv", kendall_csv(report["kendall"]))

    exp_path = run_dir / "explanations.json"
    cohorts = json.loads(exp_path.read_text(encoding="utf-8")) if exp_path.exists() else {}
    explanations = {k: [Explanation.from_dict(d) for d in v] for k, v in cohorts.items()}
    first = next((v for v in explanations.values() if v), [])
    if not first:
        log.info("no explanations in %s; summary emission skipped", run_dir)
        return written
    if "csv" in formats:
        put("shap_summary.csv", summary_ranking(first).to_csv())
    if "svg" in formats:
        put("shap_summary.svg", summary_svg(first))
        if waterfall_subjects is None:
            cfg_path = run_dir / "config.json"
            cfg = json.loads(cfg_path.read_text(encoding="utf-8")) if cfg_path.exists() else {}
            waterfall_subjects = cfg.get("explain", {}).get("waterfall_subjects", [])
        by_id = {e.subject_id: e for ex in explanations.values() for e in ex}
        for sid in waterfall_subjects:
            if sid not in by_id:
                log.warning("subject %s has no explanation; waterfall skipped", sid)
                continue
            put(f"waterfall_{_safe(sid)}.svg", waterfall_svg(by_id[sid]))
    return written
