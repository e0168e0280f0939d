"""JSON, aligned-text and CSV renderings of evaluation results."""

from __future__ import annotations

import csv
import io
from collections import Counter

from ragcritic.critique import Verdict
from ragcritic.evaluation import confusion_matrices, detection_stats, refinement_stats


def evaluate_outcomes(outcomes, supervision=None, buckets=None) -> dict:
    kwargs = {"buckets": buckets} if buckets else {}
    vc, lc = confusion_matrices(outcomes, supervision, **kwargs)
    dist = Counter(Verdict(o.verdict).value for o in outcomes)
    return {
        "n_records": len(outcomes),
        "detection": detection_stats(outcomes).to_dict(),
        "refinement": refinement_stats(outcomes).to_dict(),
        "verdict_distribution": {v.value: dist.get(v.value, 0) for v in Verdict},
        "verdict_confusion": {"labels": list(vc.labels), "counts": vc.counts},
        "location_confusion": {"labels": list(lc.labels), "counts": lc.counts},
    }


def pct(x) -> str:
    return "n/a" if x is None else f"{100.0 * x:.1f}"


def table(headers, rows) -> str:
    cells = [list(map(str, headers))] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    lines = []
    for k, r in enumerate(cells):
        lines.append("  ".join(c.rjust(w) if i else c.ljust(w) for i, (c, w) in enumerate(zip(r, widths))))
        if k == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


def matrix_table(title: str, labels, counts) -> str:
    rows = [[lab] + list(row) for lab, row in zip(labels, counts)]
    return f"{title} (rows: reference, cols: prediction)\n" + table(["ref \\ pred"] + list(labels), rows)


def matrix_csv(labels, counts) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["reference"] + list(labels))
    for lab, row in zip(labels, counts):
        w.writerow([lab] + list(row))
    return buf.getvalue()


def render_evaluation(report: dict) -> str:
    det, ref = report["detection"], report["refinement"]
    parts = [
        f"records: {report['n_records']}",
        "",
        "Error detection",
        table(
            ["Precision", "Recall", "False Alarm", "TP", "FP", "FN", "TN"],
            [[pct(det["precision"]), pct(det["recall"]), pct(det["false_alarm"]), det["tp"], det["fp"], det["fn"], det["tn"]]],
        ),
        "",
        "Refinement",
        table(
            ["Imp", "Harm", "Prec", "Corr", "Corr./Trig.", "Corr./Wrong", "Triggered"],
            [[pct(ref["imp"]), pct(ref["harm"]), pct(ref["prec"]), pct(ref["corr"]),
              pct(ref["corr_per_trig"]), pct(ref["corr_per_wrong"]), ref["triggered"]]],
        ),
        "",
        matrix_table("Verdict confusion", report["verdict_confusion"]["labels"], report["verdict_confusion"]["counts"]),
        "",
        matrix_table("Location confusion", report["location_confusion"]["labels"], report["location_confusion"]["counts"]),
    ]
    return "\n".join(parts) + "\n"


def render_comparison(named_reports) -> str:
    """Side-by-side tables over several labelled evaluation reports (values in %)."""
    names = list(named_reports)
    refinement = [
        [n, pct(r["refinement"]["imp"]), pct(r["refinement"]["harm"]), pct(r["refinement"]["prec"]), pct(r["refinement"]["corr"])]
        for n, r in named_reports.items()
    ]
    detection = [
        [n, pct(r["detection"]["precision"]), pct(r["detection"]["recall"]), pct(r["detection"]["false_alarm"])]
        for n, r in named_reports.items()
    ]
    correction = [
        [n, pct(r["refinement"]["corr_per_trig"]), pct(r["refinement"]["corr_per_wrong"])]
        for n, r in named_reports.items()
    ]
    distribution = [[n] + [named_reports[n]["verdict_distribution"][v.value] for v in Verdict] for n in names]
    return "\n\n".join(
        [
            "Refinement analysis\n" + table(["Run", "Imp", "Harm", "Prec", "Corr"], refinement),
            "Error detection\n" + table(["Run", "Precision", "Recall", "False Alarm"], detection),
            "Correction behaviour\n" + table(["Run", "Corr./Trig.", "Corr./Wrong"], correction),
            "Verdict distribution\n" + table(["Run"] + [v.value for v in Verdict], distribution),
        ]
    ) + "\n"


def comparison_csv(named_reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = ["imp", "harm", "prec", "corr", "corr_per_trig", "corr_per_wrong"]
    dcols = ["precision", "recall", "false_alarm"]
    w.writerow(["run"] + cols + dcols)
    for n, r in named_reports.items():
        w.writerow([n] + [r["refinement"][c] for c in cols] + [r["detection"][c] for c in dcols])
    return buf.getvalue()
