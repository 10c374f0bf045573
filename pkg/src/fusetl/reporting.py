"""Comparison tables and the per-run data files behind the figures."""

import csv
import io
import json
from pathlib import Path

from .metrics import ConfusionMatrix, EvalReport

COLUMNS = (
    ("accuracy", "Accuracy (%)"),
    ("precision", "Precision (%)"),
    ("recall", "Recall (%)"),
    ("f1", "F1-Score (%)"),
    ("roc_auc", "ROC-AUC (%)"),
)
NA = "n/a"

RUN_FILES = ("train_log.csv", "metrics.json", "confusion.csv", "roc.csv", "pr.csv",
             "hist.csv", "config.json")


def fmt_percent(value):
    return NA if value is None else f"{100.0 * value:.3f}"


def _rows(reports, sort_by, descending):
    keys = dict(COLUMNS)
    if sort_by not in keys:
        raise ValueError(f"sort_by must be one of {sorted(keys)}, got {sort_by!r}")
    defined = [r for r in reports if r.scalars()[sort_by] is not None]
    missing = [r for r in reports if r.scalars()[sort_by] is None]
    defined.sort(key=lambda r: r.scalars()[sort_by], reverse=descending)
    return defined + missing


def render_comparison(reports, sort_by="accuracy", descending=True):
    """Return ``(csv_text, aligned_text)``; one row per model, percentages to 3 dp.

    Models whose sort metric is undefined go last, in input order.
    """
    if not reports:
        raise ValueError("need at least one report")
    ordered = _rows(list(reports), sort_by, descending)
    header = ["Model"] + [label for _, label in COLUMNS]
    body = [[r.model] + [fmt_percent(r.scalars()[k]) for k, _ in COLUMNS] for r in ordered]

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(body)

    widths = [max(len(row[i]) for row in [header] + body) for i in range(len(header))]
    lines = []
    for row in [header] + body:
        cells = [row[0].ljust(widths[0])] + [c.rjust(wd) for c, wd in zip(row[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
    lines.insert(1, "  ".join("-" * wd for wd in widths))
    return buf.getvalue(), "\n".join(lines) + "\n"


def parse_comparison_csv(text):
    """Inverse of the CSV half of :func:`render_comparison` (fractions, None for n/a)."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    out = []
    for row in reader:
        entry = {"model": row[0]}
        for (key, _), cell in zip(COLUMNS, row[1:]):
            entry[key] = None if cell == NA else float(cell) / 100.0
        out.append(entry)
    if header[0] != "Model":
        raise ValueError("not a comparison table")
    return out


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _num(v):
    return repr(float(v))


def dumps_json(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def eval_files(report):
    """File name -> content for the evaluation half of a run."""
    cm = report.confusion
    files = {
        "metrics.json": dumps_json(report.to_dict()),
        "confusion.csv": _csv_text(("actual", "pred_negative", "pred_positive"),
                                   [("negative", cm.tn, cm.fp), ("positive", cm.fn, cm.tp)]),
    }
    for name, curve in (("roc.csv", report.roc), ("pr.csv", report.pr)):
        pts = curve.points() if curve is not None else []
        files[name] = _csv_text(("threshold", "x", "y"),
                                [(_num(t), _num(x), _num(y)) for t, x, y in pts])
    edges, counts = report.histogram
    files["hist.csv"] = _csv_text(
        ("bin_low", "bin_high", "count"),
        [(_num(edges[i]), _num(edges[i + 1]), int(counts[i])) for i in range(len(counts))])
    return files


def write_files(files, outdir):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (outdir / name).write_bytes(text.encode("utf-8"))
    return [outdir / n for n in files]


def emit_run_artifacts(log, report, outdir, config=None):
    """Write the seven run files under ``outdir``; returns their paths."""
    files = {"train_log.csv": log.to_csv(), **eval_files(report),
             "config.json": dumps_json(config or {})}
    return write_files({n: files[n] for n in RUN_FILES}, outdir)


def report_from_metrics(doc):
    """Scalar-only :class:`EvalReport` from a parsed ``metrics.json``."""
    c = doc["confusion"]
    return EvalReport(model=doc["model"], confusion=ConfusionMatrix(c["tp"], c["fp"], c["tn"], c["fn"]),
                      accuracy=doc["accuracy"], precision=doc["precision"], recall=doc["recall"],
                      f1=doc["f1"], roc_auc=doc["roc_auc"], threshold=doc.get("threshold", 0.5))
