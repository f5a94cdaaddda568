"""Figure rendering for evaluation and bench reports (headless Agg backend)."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def save_error_timeline(frames, mean_errors, path):
    fig, ax = plt.subplots(figsize=(8, 3.5))
    ax.plot(frames, mean_errors, lw=1.2)
    ax.set_xlabel("frame")
    ax.set_ylabel("mean marker error (mm)")
    ax.set_title("Tracking error over time")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_marker_errors(names, mean_errors, path):
    fig, ax = plt.subplots(figsize=(10, 4))
    x = range(len(names))
    ax.bar(x, mean_errors)
    ax.set_xticks(list(x))
    ax.set_xticklabels(names, rotation=90, fontsize=6)
    ax.set_ylabel("mean error (mm)")
    ax.set_title("Error by marker")
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_speedup(workers, speedups, path):
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(workers, speedups, "o-", label="measured")
    ax.plot(workers, workers, "--", color="gray", label="ideal")
    ax.set_xlabel("workers")
    ax.set_ylabel("speedup")
    ax.set_title("Batch evaluation speedup")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
