"""File-based rendering of report tables with matplotlib."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .report import ReportTable

__all__ = ["render_table_png"]


def render_table_png(table: ReportTable, path, kind: str = "bar") -> None:
    """Render one table to a PNG. Null rows are left out of the plot."""
    labels = [label for label, value in table.rows if value is not None]
    values = [value for _, value in table.rows if value is not None]
    fig, ax = plt.subplots(figsize=(8.0, 4.5))
    try:
        if kind == "line":
            ax.plot([float(l) for l in labels], values, marker="o", markersize=3)
            ax.set_ylim(bottom=0)
        else:
            ax.bar(range(len(labels)), values)
            ax.set_xticks(range(len(labels)))
            ax.set_xticklabels(labels, rotation=90 if len(labels) > 20 else 0,
                               fontsize=8 if len(labels) > 20 else 10)
        ax.set_title(table.title)
        ax.set_xlabel(table.x_label)
        ax.set_ylabel(table.y_label)
        ax.grid(True, axis="y", alpha=0.3)
        fig.tight_layout()
        fig.savefig(path, dpi=120)
    finally:
        plt.close(fig)
