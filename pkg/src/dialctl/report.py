"""Result tables, delimited output, and figures.

Every CLI report writes a CSV next to a rendered PNG so results can be
re-plotted or diffed without re-running the experiment.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .rl import RlRunResult
from .sl import LooResult, RocResult


def _ensure_dir(out_dir: str | Path) -> Path:
    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


# -- leave-one-out ---------------------------------------------------------

def write_loo(result: LooResult, out_dir: str | Path) -> dict[str, Path]:
    out = _ensure_dir(out_dir)
    csv_path = out / "loo_accuracy.csv"
    with csv_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["train_dialogs", "per_turn_accuracy", "whole_dialog_accuracy"])
        for size in result.sizes:
            w.writerow([size, f"{result.per_turn[size]:.6f}", f"{result.whole_dialog[size]:.6f}"])
    fig_path = out / "loo_accuracy.png"
    fig, ax = plt.subplots(figsize=(6, 4))
    xs = range(len(result.sizes))
    width = 0.38
    ax.bar([x - width / 2 for x in xs], [result.per_turn[s] for s in result.sizes],
           width, label="per turn", color="#2a9d3f")
    ax.bar([x + width / 2 for x in xs], [result.whole_dialog[s] for s in result.sizes],
           width, label="whole dialog", color="#2457a8")
    ax.set_xticks(list(xs), [str(s) for s in result.sizes])
    ax.set_xlabel("training dialogs")
    ax.set_ylabel("held-out accuracy")
    ax.set_ylim(0, 1)
    ax.legend()
    ax.set_title("Leave-one-out accuracy")
    fig.tight_layout()
    fig.savefig(fig_path, dpi=120)
    plt.close(fig)
    return {"csv": csv_path, "figure": fig_path}


def format_loo_table(result: LooResult) -> str:
    lines = ["train_dialogs  per_turn  whole_dialog"]
    for size in result.sizes:
        lines.append(
            f"{size:>13}  {result.per_turn[size]:>8.3f}  {result.whole_dialog[size]:>12.3f}"
        )
    return "\n".join(lines)


# -- architecture comparison -------------------------------------------------

def write_compare(table: dict[str, dict[int, bool]], out_dir: str | Path) -> dict[str, Path]:
    out = _ensure_dir(out_dir)
    csv_path = out / "architecture_comparison.csv"
    sizes = sorted(next(iter(table.values())).keys())
    with csv_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["train_dialogs"] + list(table.keys()))
        for size in sizes:
            w.writerow([size] + [("yes" if table[a][size] else "no") for a in table])
    return {"csv": csv_path}


def format_compare_table(table: dict[str, dict[int, bool]]) -> str:
    archs = list(table.keys())
    sizes = sorted(next(iter(table.values())).keys())
    lines = ["train_dialogs  " + "  ".join(f"{a.upper():>5}" for a in archs)]
    for size in sizes:
        cells = "  ".join(f"{'yes' if table[a][size] else 'no':>5}" for a in archs)
        lines.append(f"{size:>13}  {cells}")
    return "\n".join(lines)


# -- ROC ---------------------------------------------------------------------

def write_roc(result: RocResult, out_dir: str | Path) -> dict[str, Path]:
    out = _ensure_dir(out_dir)
    scores_path = out / "roc_scores.csv"
    with scores_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["score", "correct"])
        for score, correct in result.scores:
            w.writerow([f"{score:.6f}", int(correct)])
    points_path = out / "roc_points.csv"
    with points_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["threshold", "fpr", "tpr"])
        for thr, fpr, tpr in result.points:
            w.writerow([f"{thr:.6f}", f"{fpr:.6f}", f"{tpr:.6f}"])
    fig_path = out / "roc.png"
    fig, ax = plt.subplots(figsize=(5, 5))
    xs = [p[1] for p in result.points]
    ys = [p[2] for p in result.points]
    ax.plot([0] + xs + [1], [0] + ys + [1], color="#2457a8")
    ax.plot([0, 1], [0, 1], linestyle="--", color="#999999")
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.set_title(f"Action-score ROC (AUC {result.auc:.3f})")
    fig.tight_layout()
    fig.savefig(fig_path, dpi=120)
    plt.close(fig)
    return {"scores": scores_path, "points": points_path, "figure": fig_path}


# -- RL curves ----------------------------------------------------------------

def write_rl(results: list[RlRunResult], out_dir: str | Path) -> dict[str, Path]:
    out = _ensure_dir(out_dir)
    csv_path = out / "rl_tcr.csv"
    with csv_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n_sl", "rl_dialogs", "tcr_mean", "tcr_std"] +
                   [f"run{i}" for i in range(max(r.tcr.shape[0] for r in results))])
        for r in results:
            for j, ckpt in enumerate(r.checkpoints):
                w.writerow(
                    [r.n_sl, ckpt, f"{r.mean[j]:.6f}", f"{r.std[j]:.6f}"]
                    + [f"{v:.6f}" for v in r.tcr[:, j]]
                )
    mean_path = out / "rl_tcr_mean.png"
    std_path = out / "rl_tcr_stddev.png"
    for path, attr, label in ((mean_path, "mean", "TCR mean"), (std_path, "std", "TCR stddev")):
        fig, ax = plt.subplots(figsize=(6, 4))
        for r in results:
            ax.plot(r.checkpoints, getattr(r, attr), marker="o", label=f"SL dialogs = {r.n_sl}")
        ax.set_xlabel("RL dialogs")
        ax.set_ylabel(label)
        ax.legend()
        ax.set_title(f"{label} vs RL dialogs")
        fig.tight_layout()
        fig.savefig(path, dpi=120)
        plt.close(fig)
    return {"csv": csv_path, "mean_figure": mean_path, "std_figure": std_path}


def format_rl_table(results: list[RlRunResult]) -> str:
    lines = ["n_sl  rl_dialogs  tcr_mean  tcr_std"]
    for r in results:
        for j, ckpt in enumerate(r.checkpoints):
            lines.append(f"{r.n_sl:>4}  {ckpt:>10}  {r.mean[j]:>8.3f}  {r.std[j]:>7.3f}")
    return "\n".join(lines)
