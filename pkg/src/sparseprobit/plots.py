"""Figure rendering for the CLI report path.

Every figure has a CSV sibling carrying the same numbers; the plots are
a convenience view, never the canonical output.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def plot_elbo_trace(values, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(np.arange(1, len(values) + 1), values, marker=".", lw=1)
    ax.set_xlabel("sweep")
    ax.set_ylabel("ELBO")
    ax.set_title("ELBO trace")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_pips(names, pips, path, threshold: float = 0.5) -> None:
    pips = np.asarray(pips, dtype=float)
    fig, ax = plt.subplots(figsize=(max(6, min(14, 0.1 * len(pips))), 4))
    ax.vlines(np.arange(len(pips)), 0.0, pips, lw=1, color="C0")
    ax.axhline(threshold, color="C3", ls="--", lw=1, label=f"threshold {threshold}")
    ax.set_ylim(0, 1.02)
    ax.set_xlabel("feature index")
    ax.set_ylabel("posterior inclusion probability")
    ax.legend(loc="upper right")
    if len(pips) <= 30:
        ax.set_xticks(np.arange(len(pips)))
        ax.set_xticklabels(names, rotation=90, fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_cv_curve(rhos, dev_cv, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(rhos, dev_cv, marker="o")
    best = int(np.argmin(dev_cv))
    ax.scatter([rhos[best]], [dev_cv[best]], color="C3", zorder=3,
               label=f"best rho = {rhos[best]:g}")
    ax.set_xlabel("prior inclusion probability")
    ax.set_ylabel("cross-validation deviance")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_pip_vs_truth(true_effect, pips_by_method: dict[str, np.ndarray],
                      path, jitter_seed: int = 0) -> None:
    """PIPs against the data-generating masked coefficients.

    A small horizontal jitter separates overlapping replicates.
    """
    rng = np.random.default_rng(jitter_seed)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    true_effect = np.asarray(true_effect, dtype=float)
    for i, (method, pips) in enumerate(sorted(pips_by_method.items())):
        x = true_effect + rng.normal(scale=0.03, size=true_effect.shape)
        ax.scatter(x, pips, s=6, alpha=0.4, label=method, color=f"C{i}")
    ax.axhline(0.5, color="grey", ls=":", lw=1)
    ax.set_xlabel("true effect")
    ax.set_ylabel("posterior inclusion probability")
    ax.set_ylim(-0.02, 1.02)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
