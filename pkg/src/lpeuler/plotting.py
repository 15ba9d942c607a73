"""PNG figures written next to the CSV outputs (Agg backend, no display needed)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 8,
    "axes.titlesize": 8,
    "axes.labelsize": 8,
    "legend.fontsize": 7,
    "lines.linewidth": 1.0,
    "axes.linewidth": 0.7,
    "figure.dpi": 150,
}
FIG_SIZE = (6.4, 2.6)


def figure_path(csv_path) -> Path:
    return Path(csv_path).with_suffix(".png")


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_run(result, path) -> Path:
    """Space norm against the a priori bound, and ||omega||_{B0_inf,1} against the global bound."""
    t = result.column("t")
    with plt.rc_context(STYLE):
        fig, (a, b) = plt.subplots(1, 2, figsize=FIG_SIZE)
        a.plot(t, result.column("space_norm"), label="measured")
        a.plot(t, result.column("apriori_bound"), "--", label=f"bound, C = {result.constants['apriori']:.3g}")
        a.axvspan(0, result.config.fit_fraction * result.config.t_end, color="0.9", label="fit window")
        a.set_xlabel("t")
        a.set_ylabel(r"$\|u\|_{X}$")
        a.legend()
        b.semilogy(t, result.column("b0_vorticity"), label="measured")
        b.semilogy(t, result.column("bkm_bound"), "--", label=f"bound, C = {result.constants['global_bkm']:.3g}")
        b.set_xlabel("t")
        b.set_ylabel(r"$\|\omega\|_{B^0_{\infty,1}}$")
        b.legend()
        return _save(fig, path)


def plot_reports(reports, path) -> Path:
    """Per-sample ratios for each estimate in a suite."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=FIG_SIZE)
        for rep in reports:
            r = rep.ratios
            ax.plot(np.arange(rep.samples), r, "o", ms=2.5, label=f"{rep.estimate_id} (max {rep.empirical_constant:.3g})")
        if any(np.any(rep.ratios > 0) for rep in reports):
            ax.set_yscale("log")
        ax.set_xlabel("sample")
        ax.set_ylabel("lhs / rhs")
        ax.legend(loc="best")
        return _save(fig, path)


def plot_iterates(result, path) -> Path:
    """Increments delta_n (log scale) and sup-norms against the 2||u0|| bound."""
    n = [r.n for r in result.records]
    with plt.rc_context(STYLE):
        fig, (a, b) = plt.subplots(1, 2, figsize=FIG_SIZE)
        deltas = np.array([r.delta_n for r in result.records])
        a.semilogy(n, np.where(deltas > 0, deltas, np.nan), "o-")
        a.set_xlabel("n")
        a.set_ylabel(r"$\delta_n$")
        a.set_title(rf"$\rho$ = {result.rho:.3g}")
        b.plot(n, [r.sup_norm for r in result.records], "o-", label="sup norm")
        b.axhline(2 * result.u0_norm, ls="--", color="k", label=r"$2\|u_0\|$")
        b.set_xlabel("n")
        b.legend()
        return _save(fig, path)


def plot_weight(js, psi, path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=FIG_SIZE)
        ax.plot(js, psi, "o-")
        ax.set_xlabel("j")
        ax.set_ylabel(r"$\psi(2^j)$")
        return _save(fig, path)
