"""Figure output for interlacing reports (file only, Agg backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def interlacing_figure(series, path, title=None) -> None:
    """Plot lambda_{Theta,j+1} and lambda_{D,j} with error bars against j."""
    js = [r["j"] for r in series]
    fig, ax = plt.subplots(figsize=(6.0, 4.0), dpi=100)
    ax.errorbar(js, [r["lambda_theta"] for r in series], yerr=[r["lambda_theta_err"] for r in series],
                fmt="o-", capsize=3, label=r"$\lambda_{\Theta,j+1}$")
    ax.errorbar(js, [r["lambda_dirichlet"] for r in series], yerr=[r["lambda_dirichlet_err"] for r in series],
                fmt="s--", capsize=3, label=r"$\lambda_{D,j}$")
    bad = [r for r in series if r["verdict"] != "holds_strict"]
    if bad:
        ax.scatter([r["j"] for r in bad], [r["lambda_theta"] for r in bad], s=120, facecolors="none",
                   edgecolors="red", label="not certified")
    ax.set_xlabel("j")
    ax.set_ylabel("eigenvalue")
    if title:
        ax.set_title(title)
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    # fixed metadata keeps repeated runs byte-identical
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
