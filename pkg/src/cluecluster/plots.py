"""Report figures rendered next to the delimited outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .errors import IoError

METRIC_COLUMNS = ("wcp", "nmi", "cp", "cr", "cf")


def _save(fig, path) -> None:
    try:
        fig.savefig(path, dpi=110)
    except OSError as exc:
        raise IoError(f"cannot write figure {path}: {exc}") from None
    finally:
        plt.close(fig)


def plot_training_curve(log_rows, path) -> None:
    """Loss components per iteration on a log-scaled y axis."""
    its = [r[0] for r in log_rows]
    fig, ax = plt.subplots(figsize=(7, 4.2))
    ax.plot(its, [r[1] for r in log_rows], label="total", lw=1.2)
    ax.plot(its, [r[2] for r in log_rows], label="feature", lw=0.9, alpha=0.8)
    ax.plot(its, [r[3] for r in log_rows], label="distribution", lw=0.9, alpha=0.8)
    ax.set_xlabel("iteration")
    ax.set_ylabel("loss")
    ax.set_yscale("log")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    _save(fig, path)


def plot_sweep(rows, path) -> None:
    """Every metric against the clustering threshold."""
    thr = [r[0] for r in rows]
    fig, ax = plt.subplots(figsize=(7, 4.2))
    for col, name in enumerate(METRIC_COLUMNS, start=1):
        ax.plot(thr, [r[col] for r in rows], marker="o", ms=3, label=name.upper())
    ax.set_xlabel("threshold")
    ax.set_ylabel("metric")
    ax.set_ylim(0.0, 1.05)
    ax.legend(ncol=3, fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    _save(fig, path)


def plot_metric_bars(metrics: dict[str, float], path) -> None:
    """One bar per evaluation metric."""
    names = list(metrics)
    values = [metrics[k] for k in names]
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    bars = ax.bar([n.upper() for n in names], values, color="#4878a8")
    for b, v in zip(bars, values):
        ax.text(
            b.get_x() + b.get_width() / 2,
            v + 0.01,
            f"{v:.3f}",
            ha="center",
            fontsize=8,
        )
    ax.set_ylim(0.0, 1.1)
    ax.set_ylabel("value")
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    _save(fig, path)
