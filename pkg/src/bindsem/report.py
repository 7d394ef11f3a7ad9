"""Corpus report: law-suite results as CSV plus matplotlib figures.

The report runs the randomized suites over the builtin catalog, writes one
delimited summary, and renders a pass-rate chart and reduction-graph drawings
next to it.  Figure layout is deterministic (no randomized embedding).
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from . import laws as laws_mod
from .cli import graph_dot, graph_json
from .reduction import reduction_graph
from .signature import builtin
from .terms import parse_term, print_term

LAW_SIGNATURES = ("lc", "lc_beta_eta", "lc_fix", "monoid", "lj", "ll", "lc_ex",
                  "cbv_small", "cbv_big", "pi")

SHOWCASE_GRAPHS = {
    "omega": ("lc_beta_eta", "app(abs(x. app(x, x)), abs(x. app(x, x)))",
              ["beta-red"]),
    "nested-redex": ("lc_beta_eta", "app(abs(x. x), app(abs(y. y), abs(q. q)))",
                     ["beta-red", "app-cong1", "app-cong2", "abs-cong"]),
    "fix-unfold": ("lc_fix", "app(abs(x. x), abs(q. q))",
                   ["beta-red", "fix-exp", "app-cong1", "app-cong2",
                    "abs-cong", "fix-cong"]),
}


def write_report(out: Path, seed: int = 0, count: int = 100) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    results = []
    for sig_name in LAW_SIGNATURES:
        doc = builtin(sig_name)
        suites = list(laws_mod.SUITES) if doc.rules else ["monad", "module", "equation"]
        for suite in suites:
            results.append(laws_mod.run_suite(suite, doc, sig_name, count, seed))

    csv_path = out / "report.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["signature", "suite", "cases", "passed", "ok"])
        for r in results:
            writer.writerow([r.signature, r.suite, r.cases, r.passed,
                             "yes" if r.ok else "no"])
    written.append(csv_path)

    written.append(_laws_figure(out, results, seed))

    for name, (sig_name, term_text, rules) in SHOWCASE_GRAPHS.items():
        doc = builtin(sig_name)
        t = parse_term(term_text, 0, doc, [])
        g = reduction_graph([t], doc, 0, max_nodes=40, max_edges=120, rules=rules)
        json_path = out / f"graph_{name}.json"
        import json as json_lib

        json_path.write_text(
            json_lib.dumps(graph_json(g, doc, []), sort_keys=True, indent=2) + "\n"
        )
        written.append(json_path)
        dot_path = out / f"graph_{name}.dot"
        dot_path.write_text(graph_dot(g, doc, []) + "\n")
        written.append(dot_path)
        written.append(_graph_figure(out, name, g, doc))
    return written


def _laws_figure(out: Path, results, seed: int) -> Path:
    labels = [f"{r.signature}\n{r.suite}" for r in results]
    rates = [r.passed / r.cases if r.cases else 1.0 for r in results]
    fig, ax = plt.subplots(figsize=(max(6, 0.45 * len(labels)), 3.2))
    colors = ["#2a7e43" if r.ok else "#b03a2e" for r in results]
    ax.bar(range(len(labels)), rates, color=colors)
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, fontsize=6, rotation=90)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("pass rate")
    ax.set_title(f"law suites (seed {seed})")
    fig.tight_layout()
    path = out / "laws.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _graph_figure(out: Path, name: str, g, doc) -> Path:
    n = max(len(g.nodes), 1)
    # fixed circular embedding: deterministic and readable at desk scale
    pos = {
        i: (math.cos(2 * math.pi * i / n), math.sin(2 * math.pi * i / n))
        for i in range(len(g.nodes))
    }
    fig, ax = plt.subplots(figsize=(5, 5))
    for (i, j, rule) in g.edges:
        x1, y1 = pos[i]
        x2, y2 = pos[j]
        if i == j:
            ax.annotate(
                rule, xy=(x1, y1 + 0.18), fontsize=6, ha="center", color="#555555"
            )
            circle = plt.Circle((x1, y1 + 0.09), 0.08, fill=False,
                                color="#888888", linewidth=0.8)
            ax.add_patch(circle)
            continue
        ax.annotate(
            "",
            xy=(x2, y2), xytext=(x1, y1),
            arrowprops={"arrowstyle": "-|>", "color": "#888888", "lw": 0.8,
                        "shrinkA": 12, "shrinkB": 12},
        )
        ax.annotate(rule, xy=((x1 + x2) / 2, (y1 + y2) / 2), fontsize=6,
                    ha="center", color="#555555")
    for i, t in enumerate(g.nodes):
        x, y = pos[i]
        ax.plot([x], [y], "o", color="#2c5f8a", markersize=10)
        label = print_term(t, doc, [])
        if len(label) > 28:
            label = label[:25] + "..."
        ax.annotate(label, xy=(x, y - 0.14), fontsize=6, ha="center")
    ax.set_xlim(-1.4, 1.4)
    ax.set_ylim(-1.4, 1.4)
    ax.set_axis_off()
    ax.set_title(f"reduction graph: {name}", fontsize=9)
    fig.tight_layout()
    path = out / f"graph_{name}.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
