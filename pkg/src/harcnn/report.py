"""Delimited reports and matplotlib figures.

File layout inside a results directory::

    <group>_<config>_<fold>.csv      per-fold and pooled metrics (fold = 1..k | pooled)
    <group>_<config>_folds.csv       subject assignment of every fold
    <group>_<config>_confusion.svg   row-normalized pooled confusion matrix
    fscore_matrix.csv / .svg         activity x configuration F-score grid
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.patches import Rectangle  # noqa: E402

from .data.registry import CONFIGS, GROUPS, get_config, get_group  # noqa: E402
from .metrics import EvalReport  # noqa: E402

log = logging.getLogger(__name__)

COLOR_FLOOR = 0.4
CMAP = "gray"
REPORT_FIELDS = ("group", "config", "fold", "activity", "precision", "recall", "fscore", "support")

# fixed ids and no date stamp, so reruns write identical SVG bytes
_SVG_RC = {"svg.hashsalt": "harcnn", "svg.fonttype": "none"}
_SVG_META = {"Date": None, "Creator": None}


def report_name(group: str, config: str, fold) -> str:
    return f"{group}_{config}_{fold}.csv"


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def write_report_csv(report: EvalReport, path) -> None:
    """One row per class plus a ``macro`` row; confusion counts as ``pred_<activity>`` columns."""
    meta = report.meta
    head = [meta.get("group", ""), meta.get("config", ""), meta.get("fold", "")]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_FIELDS + tuple(f"pred_{a}" for a in report.labels))
        for i, a in enumerate(report.labels):
            w.writerow(
                head
                + [a, _fmt(report.precision[i]), _fmt(report.recall[i]), _fmt(report.fscore[i]), int(report.support[i])]
                + [int(c) for c in report.confusion[i]]
            )
        w.writerow(
            head
            + ["macro", _fmt(report.macro_precision), _fmt(report.macro_recall), _fmt(report.macro_f), report.total]
            + [""] * len(report.labels)
        )


def read_report_csv(path) -> EvalReport:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    rows = [r for r in rows if r["activity"] != "macro"]
    labels = tuple(r["activity"] for r in rows)
    cm = np.array([[int(r[f"pred_{a}"]) for a in labels] for r in rows], dtype=np.int64)
    meta = {k: rows[0][k] for k in ("group", "config", "fold")} if rows else {}
    return EvalReport(labels, cm, meta)


def write_fold_plan_csv(result, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("fold", "test_subjects", "train_subjects", "note"))
        for f in result.folds:
            test = " ".join(map(str, sorted(f.test_subjects)))
            train = " ".join(map(str, sorted(f.train_subjects)))
            w.writerow((f.fold, test, train, result.plan.note))


def write_crossval(result, out_dir) -> list:
    """Write every report of a cross-validation run; returns the paths written."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    g, c = result.group.name, result.config.name
    paths = []
    for f in result.folds:
        p = out_dir / report_name(g, c, f.fold)
        write_report_csv(f.report, p)
        paths.append(p)
    p = out_dir / report_name(g, c, "pooled")
    write_report_csv(result.pooled, p)
    paths.append(p)
    p = out_dir / f"{g}_{c}_folds.csv"
    write_fold_plan_csv(result, p)
    paths.append(p)
    p = out_dir / f"{g}_{c}_confusion.svg"
    plot_confusion(result.pooled, p, title=f"{g} / {c}")
    paths.append(p)
    return paths


# -- F-score grid -------------------------------------------------------------


@dataclass
class FScoreGrid:
    rows: list  # (group, activity)
    columns: list  # config names, grid order
    values: np.ndarray  # NaN where empty
    inapplicable: np.ndarray  # bool

    @property
    def empty(self) -> bool:
        return bool(np.isnan(self.values).all())


def fscore_matrix(reports) -> FScoreGrid:
    """Collect per-activity F-scores of pooled reports into the grid.

    Rows follow the activity groups, columns the configuration order
    (singles, doubles, triples). Cells with no report, and cells whose
    configuration is not applicable to the group, stay empty.
    """
    rows = [(g.name, a) for g in GROUPS.values() for a in g.labels]
    columns = [c.name for c in CONFIGS]
    values = np.full((len(rows), len(columns)), np.nan)
    inapplicable = np.array([[not GROUPS[g].allows(c) for c in CONFIGS] for g, _ in rows])
    row_of = {r: i for i, r in enumerate(rows)}
    for rep in reports:
        group = get_group(rep.meta["group"])
        j = columns.index(get_config(rep.meta["config"]).name)
        for a, f in zip(rep.labels, rep.fscore):
            i = row_of[(group.name, a)]
            if not inapplicable[i, j]:
                values[i, j] = f
    return FScoreGrid(rows, columns, values, inapplicable)


def write_fscore_csv(grid: FScoreGrid, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["group", "activity"] + grid.columns)
        for (g, a), vals in zip(grid.rows, grid.values):
            w.writerow([g, a] + ["" if np.isnan(v) else _fmt(v) for v in vals])


def read_fscore_csv(path) -> FScoreGrid:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        body = list(reader)
    columns = header[2:]
    rows = [(r[0], r[1]) for r in body]
    values = np.array([[float(v) if v else np.nan for v in r[2:]] for r in body])
    inapplicable = np.array([[not GROUPS[g].allows(get_config(c)) for c in columns] for g, _ in rows])
    return FScoreGrid(rows, columns, values, inapplicable)


def tile_color(f: float, floor: float = COLOR_FLOOR):
    """RGBA tile colour: black at or below ``floor``, white at 1."""
    norm = matplotlib.colors.Normalize(vmin=floor, vmax=1.0, clip=True)
    return plt.get_cmap(CMAP)(norm(f))


def grid_colors(grid: FScoreGrid, floor: float = COLOR_FLOOR) -> np.ndarray:
    """``(rows, columns, 4)`` RGBA tiles; empty cells are white with zero alpha."""
    out = np.zeros(grid.values.shape + (4,))
    out[..., :3] = 1.0
    filled = ~np.isnan(grid.values)
    out[filled] = tile_color(grid.values[filled], floor)
    return out


def plot_fscore_matrix(grid: FScoreGrid, path, floor: float = COLOR_FLOOR) -> None:
    with plt.rc_context(_SVG_RC):
        fig, ax = plt.subplots(figsize=(0.55 * len(grid.columns) + 2.5, 0.35 * len(grid.rows) + 1.5))
        ax.imshow(grid_colors(grid, floor), aspect="auto", interpolation="nearest")
        # hatch inapplicable cells so they cannot be mistaken for F = 1
        for i, j in zip(*np.nonzero(grid.inapplicable)):
            ax.add_patch(Rectangle((j - 0.5, i - 0.5), 1, 1, fill=False, hatch="//", lw=0, color="0.6"))
        for i, j in zip(*np.nonzero(~np.isnan(grid.values))):
            v = grid.values[i, j]
            ax.text(j, i, f"{v:.2f}", ha="center", va="center", fontsize=6, color="black" if v > 0.75 else "white")
        ax.set_xticks(range(len(grid.columns)), grid.columns, rotation=90, fontsize=7)
        ax.set_yticks(range(len(grid.rows)), [a for _, a in grid.rows], fontsize=7)
        # group separators
        for x in (4.5, 8.5):
            ax.axvline(x, color="black", lw=1.5)
        edges = np.cumsum([g.m for g in GROUPS.values()])[:-1] - 0.5
        for y in edges:
            ax.axhline(y, color="black", lw=1.5)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata=_SVG_META)
        plt.close(fig)


def plot_confusion(report: EvalReport, path, title: str = "") -> None:
    norm = report.normalized()
    with plt.rc_context(_SVG_RC):
        m = len(report.labels)
        fig, ax = plt.subplots(figsize=(0.6 * m + 1.8, 0.6 * m + 1.4))
        ax.imshow(norm, cmap="Blues", vmin=0.0, vmax=1.0)
        for i in range(m):
            for j in range(m):
                ax.text(j, i, f"{100 * norm[i, j]:.0f}%", ha="center", va="center", fontsize=7,
                        color="white" if norm[i, j] > 0.6 else "black")
        ax.set_xticks(range(m), report.labels, rotation=45, fontsize=8)
        ax.set_yticks(range(m), report.labels, fontsize=8)
        ax.set_xlabel("predicted")
        ax.set_ylabel("true")
        if title:
            ax.set_title(title, fontsize=9)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata=_SVG_META)
        plt.close(fig)


def collect_pooled_reports(results_dir) -> list:
    return [read_report_csv(p) for p in sorted(Path(results_dir).glob("*_pooled.csv"))]


def build_report(results_dir, out_dir=None) -> FScoreGrid:
    """Assemble ``fscore_matrix.csv`` / ``.svg`` from every pooled report in ``results_dir``."""
    out_dir = Path(out_dir or results_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    grid = fscore_matrix(collect_pooled_reports(results_dir))
    if grid.empty:
        log.warning("no pooled reports found in %s; writing an empty grid", results_dir)
    write_fscore_csv(grid, out_dir / "fscore_matrix.csv")
    plot_fscore_matrix(grid, out_dir / "fscore_matrix.svg")
    return grid
