"""Report figures written next to the CSV/JSON outputs.

Uses the non-interactive Agg backend; PNGs carry no timestamp metadata so
reruns produce identical files.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.right": False,
    "axes.spines.top": False,
    "figure.dpi": 100,
    "savefig.dpi": 120,
}

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def new(width=5.0, nrows=1, ncols=1, height=None):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(nrows, ncols, figsize=(width, height or width * GOLDEN))
    return fig, ax


def save(fig, path):
    with plt.rc_context(STYLE):
        fig.tight_layout()
        fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def _short(name, n=14):
    name = str(name).replace("_", " ")
    return name if len(name) <= n else name[: n - 1] + "."


def training_curves(report, path):
    """Accuracy and loss per epoch, train vs validation."""
    with plt.rc_context(STYLE):
        fig, (acc, loss) = new(8.0, 1, 2, height=3.0)
        epochs = np.arange(1, report.epochs_run + 1)
        acc.plot(epochs, report.train_acc, label="train")
        acc.plot(epochs, report.val_acc, label="validation")
        acc.set_xlabel("epoch")
        acc.set_ylabel("accuracy")
        acc.set_ylim(0, 1.02)
        if report.best_epoch:
            acc.axvline(report.best_epoch, color="grey", lw=0.8, ls=":")
        acc.legend(loc="lower right")
        loss.plot(epochs, report.train_loss, label="train")
        loss.plot(epochs, report.val_loss, label="validation")
        loss.set_xlabel("epoch")
        loss.set_ylabel("cross-entropy")
        loss.legend(loc="upper right")
    return save(fig, path)


def confusion(report, path):
    cm = np.asarray(report.confusion)
    labels = [_short(l) for l in report.labels]
    with plt.rc_context(STYLE):
        fig, ax = new(4.5, height=4.0)
        im = ax.imshow(cm, cmap="Blues")
        ax.set_xticks(range(len(labels)), labels, rotation=35, ha="right")
        ax.set_yticks(range(len(labels)), labels)
        ax.set_xlabel("predicted")
        ax.set_ylabel("true")
        hi = cm.max() if cm.size else 0
        for (i, j), v in np.ndenumerate(cm):
            ax.text(j, i, str(v), ha="center", va="center",
                    color="white" if hi and v > hi / 2 else "black")
        fig.colorbar(im, ax=ax, fraction=0.046, pad=0.04)
    return save(fig, path)


def roc(report, path):
    with plt.rc_context(STYLE):
        fig, ax = new(4.5, height=4.0)
        ax.plot([0, 1], [0, 1], color="grey", lw=0.8, ls="--")
        for entry in report.roc:
            if not entry["points"]:
                continue
            pts = np.asarray(entry["points"])
            ax.plot(pts[:, 0], pts[:, 1], label=f"{_short(entry['label'])} (AUC {entry['auc']:.3f})")
            op = entry.get("threshold_0_5")
            if op:
                ax.plot(op["fpr"], op["tpr"], "o", ms=3, color=ax.lines[-1].get_color())
        ax.set_xlabel("false positive rate")
        ax.set_ylabel("true positive rate")
        ax.set_xlim(-0.01, 1.01)
        ax.set_ylim(-0.01, 1.01)
        if ax.get_legend_handles_labels()[0]:
            ax.legend(loc="lower right")
    return save(fig, path)


def sweep(rows, path):
    """Mean clip accuracy against MFCC count, one line per phoneme set."""
    by_set = {}
    for r in rows:
        by_set.setdefault(r["phonemes"], {}).setdefault(int(r["mfcc"]), []).append(float(r["clip_acc"]))
    with plt.rc_context(STYLE):
        fig, ax = new(5.0)
        for phonemes, cells in by_set.items():
            xs = sorted(cells)
            ax.plot(xs, [np.mean(cells[x]) for x in xs], marker="o", label=f"/{phonemes}/")
        ax.set_xlabel("number of MFCCs")
        ax.set_ylabel("clip accuracy")
        ax.legend()
    return save(fig, path)
