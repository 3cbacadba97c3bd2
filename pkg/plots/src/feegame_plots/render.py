"""Render sweep CSVs to PNG and SVG charts.

Consumes the CSV schemas emitted by the `feegame sweep` command verbatim; no
computation happens here beyond reading the tables. Output is deterministic:
SVG timestamps are suppressed and the id hash salt is pinned, so re-rendering
the same CSV produces identical bytes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "feegame-plots"

KIND_COLUMNS: dict[str, tuple[str, ...]] = {
    "trade_split": ("fraction", "output"),
    "split_vs_fee": ("fee", "fraction"),
    "utility_vs_fee": ("fee", "utility"),
    "two_pool_share": (
        "share",
        "fee_pool1",
        "fee_pool2",
        "relfee_pool1",
        "relfee_pool2",
    ),
    "three_pool_share": (
        "share",
        "fee_pool1",
        "fee_pool2",
        "fee_pool3",
        "relfee_pool1",
        "relfee_pool2",
        "relfee_pool3",
        "relfee_weighted_avg",
    ),
}

AXIS_LABELS: dict[str, tuple[str, str]] = {
    "trade_split": ("fraction routed to pool 1", "target tokens received"),
    "split_vs_fee": ("fee of pool 1", "optimal fraction in pool 1"),
    "utility_vs_fee": ("fee of pool 1", "fees collected (source tokens)"),
}


class SchemaError(ValueError):
    """CSV header or contents do not match the figure kind's schema."""


@dataclass(frozen=True)
class FigureJob:
    csv_path: str | Path
    figure_kind: str
    output_path: str | Path  # stem; .png and .svg are appended
    title: str | None = None


@dataclass(frozen=True)
class RenderResult:
    png_path: Path
    svg_path: Path
    panel_series: tuple[int, ...]  # plotted line count per panel, top to bottom
    peak_x: float | None  # abscissa of the marked maximum, if any


def load_table(path: str | Path, kind: str) -> dict[str, list[float]]:
    """Read and schema-check one sweep CSV; returns column name -> values."""
    if kind not in KIND_COLUMNS:
        raise SchemaError(f"unknown figure kind {kind!r}")
    expected = KIND_COLUMNS[kind]
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(
                f"{path}: empty file; expected columns {','.join(expected)}"
            ) from None
        if tuple(header) != expected:
            missing = [c for c in expected if c not in header]
            extra = [c for c in header if c not in expected]
            raise SchemaError(
                f"{path}: header mismatch for kind {kind}: "
                f"missing {missing or 'none'}, unexpected {extra or 'none'}"
            )
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(expected):
                raise SchemaError(f"{path}: line {lineno}: expected {len(expected)} cells")
            try:
                rows.append([float(cell) for cell in row])
            except ValueError as exc:
                raise SchemaError(f"{path}: line {lineno}: {exc}") from None
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return {name: [row[i] for row in rows] for i, name in enumerate(expected)}


def _save(fig, stem: Path) -> tuple[Path, Path]:
    stem.parent.mkdir(parents=True, exist_ok=True)
    png = stem.with_suffix(".png")
    svg = stem.with_suffix(".svg")
    fig.savefig(png, dpi=150)
    fig.savefig(svg, metadata={"Date": None})
    plt.close(fig)
    return png, svg


def _render_single_panel(job: FigureJob, table: dict[str, list[float]]) -> RenderResult:
    x_name, y_name = KIND_COLUMNS[job.figure_kind]
    xs, ys = table[x_name], table[y_name]
    fig, ax = plt.subplots(figsize=(8, 5))
    ax.plot(xs, ys, color="tab:blue")
    peak_x = None
    if job.figure_kind == "trade_split":
        best = max(range(len(ys)), key=ys.__getitem__)
        peak_x = xs[best]
        ax.plot([peak_x], [ys[best]], "o", color="tab:red")
        ax.annotate(
            f"max at {peak_x:.4g}",
            xy=(peak_x, ys[best]),
            xytext=(5, -12),
            textcoords="offset points",
        )
    xlabel, ylabel = AXIS_LABELS[job.figure_kind]
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(job.title or job.figure_kind.replace("_", " "))
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    png, svg = _save(fig, Path(job.output_path))
    return RenderResult(png, svg, panel_series=(len(ax.lines),), peak_x=peak_x)


def _render_share_panels(job: FigureJob, table: dict[str, list[float]]) -> RenderResult:
    pools = 3 if job.figure_kind == "three_pool_share" else 2
    shares = table["share"]
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(8, 8), sharex=True)
    colors = ["tab:blue", "tab:orange", "tab:green"]
    for k in range(pools):
        top.plot(shares, table[f"fee_pool{k + 1}"], color=colors[k], label=f"pool {k + 1}")
        bottom.plot(
            shares, table[f"relfee_pool{k + 1}"], color=colors[k], label=f"pool {k + 1}"
        )
    if job.figure_kind == "three_pool_share":
        bottom.plot(
            shares,
            table["relfee_weighted_avg"],
            color="black",
            linestyle="--",
            label="pools 1+2 weighted avg",
        )
    top.set_ylabel("equilibrium fee")
    bottom.set_ylabel("fees collected / pool size")
    bottom.set_xlabel("share of liquidity in pool 1")
    top.set_title(job.title or job.figure_kind.replace("_", " "))
    for ax in (top, bottom):
        ax.grid(True, alpha=0.3)
        ax.legend(loc="best")
    fig.tight_layout()
    png, svg = _save(fig, Path(job.output_path))
    return RenderResult(
        png, svg, panel_series=(len(top.lines), len(bottom.lines)), peak_x=None
    )


def render(job: FigureJob) -> RenderResult:
    """Render one CSV to PNG + SVG; raises SchemaError on malformed input."""
    table = load_table(job.csv_path, job.figure_kind)
    if job.figure_kind in ("two_pool_share", "three_pool_share"):
        return _render_share_panels(job, table)
    return _render_single_panel(job, table)
