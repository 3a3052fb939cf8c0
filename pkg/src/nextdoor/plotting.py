"""Matplotlib figures for experiment tables and reports (written to files)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_power_curves(table: pd.DataFrame, path, metric: str = "power") -> None:
    """Rejection rate against signal strength, one line per method.

    ``table`` is the output of :func:`nextdoor.simulation.power_curve`.
    """
    rows = table[table["metric"].str.startswith(metric + "@")].copy()
    rows["signal"] = rows["metric"].str.split("@").str[1].astype(float)
    fig, ax = plt.subplots(figsize=(5, 3.6))
    for meth, g in rows.groupby("method", sort=False):
        g = g.sort_values("signal")
        ax.errorbar(g["signal"], g["value"], yerr=2 * g["se"], marker="o", ms=3,
                    capsize=2, label=meth)
    ax.set_xlabel("signal")
    ax.set_ylabel(metric)
    ax.set_ylim(-0.02, 1.02)
    ax.legend(fontsize=8)
    _save(fig, path)


def plot_rates(table: pd.DataFrame, path, level: float = None) -> None:
    """Bar chart of type I error rates with 2-SE whiskers."""
    rows = table[table["metric"] == "type1_error"]
    fig, ax = plt.subplots(figsize=(5, 3.4))
    x = np.arange(len(rows))
    ax.bar(x, rows["value"], yerr=2 * rows["se"], capsize=3, color="0.6")
    ax.set_xticks(x, rows["method"], rotation=20, fontsize=8)
    if level is not None:
        ax.axhline(level, color="k", lw=0.8, ls="--")
    ax.set_ylabel("rejection rate")
    _save(fig, path)


def _ecdf(ax, p, **kw):
    p = np.sort(np.asarray(p))
    ax.step(p, np.arange(1, len(p) + 1) / len(p), where="post", **kw)


def plot_pvalue_ecdfs(result, path) -> None:
    """ECDFs of the four p-values, with and without mean rescaling."""
    fig, axes = plt.subplots(1, 2, figsize=(8, 3.8), sharey=True)
    styles = {"p1l": ("lightblue", "-"), "p1r": ("darkblue", "-"),
              "p2l": ("red", "--"), "p2r": ("black", "--")}
    for ax, rescaled in zip(axes, (True, False)):
        for name, (col, ls) in styles.items():
            _ecdf(ax, result.pvalues[(rescaled, name)], color=col, ls=ls, label=name)
        ax.plot([0, 1], [0, 1], color="0.5", lw=0.6)
        ax.set_title("mean rescaled" if rescaled else "not rescaled", fontsize=10)
        ax.set_xlabel("p-value")
    axes[0].set_ylabel("empirical CDF")
    axes[0].legend(fontsize=8)
    _save(fig, path)


def plot_nested_curve(curve, path) -> None:
    """Held-out error against the number of features in the nested refits."""
    k, err = zip(*curve)
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    ax.plot(k, err, marker="o")
    ax.set_xlabel("number of features")
    ax.set_ylabel("test error")
    ax.set_xticks(k)
    _save(fig, path)


def plot_report(report, path) -> None:
    """Randomized selection counts over the grid and de-biased errors per model."""
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(9, 3.6))
    lam = np.asarray(report.lambdas)
    a1.bar(np.log(lam), report.selection_counts, width=np.abs(np.diff(np.log(lam))).min() if
           len(lam) > 1 else 0.1, color="0.6")
    a1.axvline(np.log(report.chosen_lambda), color="r", lw=1)
    a1.set_xlabel("log lambda")
    a1.set_ylabel("selection count")
    cols = [report.base] + report.ordered()
    a2.barh([c.label for c in cols][::-1], [c.debiased_error for c in cols][::-1], color="0.6")
    a2.set_xlabel("de-biased CV error")
    _save(fig, path)
