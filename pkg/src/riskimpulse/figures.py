"""Figure rendering for the CLI report path.

Figures are written to files next to the delimited outputs and never
shown interactively; the CSVs remain the authoritative artifacts.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def solution_figure(path, grid, solution, shift_flag, targets):
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    ax1.plot(grid.points, solution.w, lw=1.5)
    ax1.set_ylabel("w(x)")
    ax1.set_title(
        f"Bellman pair: lambda={solution.lam:.6f}, gamma={solution.gamma}, "
        f"{solution.iterations} iterations"
    )
    shift = shift_flag.astype(bool)
    ax2.scatter(grid.points[~shift], np.zeros(np.sum(~shift)), s=8, label="stay")
    if np.any(shift):
        ax2.scatter(grid.points[shift], targets[shift], s=8, label="shift target")
    ax2.set_xlabel("x")
    ax2.set_ylabel("action")
    ax2.legend(loc="best", fontsize=8)
    _finish(fig, path)


def longrun_figure(path, horizons, per_horizon, lam_over_delta):
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(horizons, per_horizon, lw=1.2, label="J estimate")
    ax.axhline(lam_over_delta, color="k", ls="--", lw=1, label="lambda / delta")
    ax.set_xlabel("horizon T")
    ax.set_ylabel("entropic rate")
    ax.legend(loc="best", fontsize=8)
    _finish(fig, path)


def drift_figure(path, estimate, gammas):
    fig, ax = plt.subplots(figsize=(7, 4))
    wx = np.abs(estimate.test_states)
    for g in gammas:
        resid = estimate.M2_hat[g]
        ax.scatter([g], [resid], s=20)
    ax.set_xlabel("gamma")
    ax.set_ylabel("max residual M2(gamma)")
    label = f"certified b1={estimate.b1_hat:.2f}" if estimate.certified else "NOT certified"
    ax.set_title(f"one-step drift of the weight ({label}), {wx.size} probe states")
    _finish(fig, path)


def minorisation_figure(path, estimate):
    fig, ax = plt.subplots(figsize=(7, 4))
    centers = 0.5 * (estimate.bin_edges[1:] + estimate.bin_edges[:-1])
    width = estimate.bin_edges[1] - estimate.bin_edges[0]
    ax.bar(centers, estimate.nu_hat, width=width * 0.9)
    ax.set_xlabel("x")
    ax.set_ylabel("nu_hat mass")
    ax.set_title(
        f"minorisation witness: d_hat={estimate.d_hat:.4g}, "
        f"overlap on shift set={estimate.overlap_on_U:.3f}"
    )
    _finish(fig, path)


def sweep_figure(path, pairs):
    fig, ax = plt.subplots(figsize=(7, 4))
    gam = [g for g, _ in pairs]
    lam = [l for _, l in pairs]
    ax.plot(gam, lam, marker="o", lw=1.2)
    ax.set_xlabel("gamma")
    ax.set_ylabel("lambda")
    ax.set_title("gain vs risk aversion (shared kernel)")
    _finish(fig, path)


def contraction_figure(path, estimate):
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.hist(estimate.ratios, bins=24)
    ax.axvline(1.0, color="k", ls="--", lw=1)
    ax.set_xlabel("span ratio per pair")
    ax.set_ylabel("count")
    ax.set_title(f"empirical contraction: L_hat={estimate.L_hat:.4f}")
    _finish(fig, path)


def holder_figure(path, gaps_super, gaps_sub):
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.hist(gaps_super, bins=40, alpha=0.6, label="lhs - superadditive bound")
    ax.hist(gaps_sub, bins=40, alpha=0.6, label="subadditive bound - lhs")
    ax.axvline(0.0, color="k", lw=1)
    ax.set_xlabel("inequality slack")
    ax.set_ylabel("count")
    ax.legend(loc="best", fontsize=8)
    _finish(fig, path)


def noise_bound_figure(path, rows):
    fig, ax = plt.subplots(figsize=(7, 4))
    labels = [f"d={d}, g={g}" for d, g, _, _ in rows]
    emp = [e for _, _, e, _ in rows]
    bnd = [b for _, _, _, b in rows]
    xs = np.arange(len(rows))
    ax.bar(xs - 0.18, emp, width=0.36, label="empirical MGF")
    ax.bar(xs + 0.18, bnd, width=0.36, label="analytic bound")
    ax.set_xticks(xs, labels, rotation=30, fontsize=8)
    ax.set_yscale("log")
    ax.legend(loc="best", fontsize=8)
    _finish(fig, path)
