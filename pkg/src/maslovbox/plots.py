"""Figure rendering for conjugate-point curve sweeps."""
from __future__ import annotations

from typing import Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def plot_curves(rows: Sequence[Tuple[float, int, float]], out_path: str,
                title: str = "") -> None:
    """Render x*(lambda) strands to a PNG.

    ``rows`` are (lambda, strand_index, x_star) triples as produced by the
    curve sweep; strands are colored by index.
    """
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    by_strand = {}
    for lam, idx, x_star in rows:
        by_strand.setdefault(idx, ([], []))
        by_strand[idx][0].append(lam)
        by_strand[idx][1].append(x_star)
    for idx in sorted(by_strand):
        lams, xs = by_strand[idx]
        ax.plot(lams, xs, ".-", ms=3, lw=0.8, label=f"strand {idx}")
    ax.set_xlabel(r"$\lambda$")
    ax.set_ylabel(r"$x_*$")
    if title:
        ax.set_title(title)
    if by_strand:
        ax.legend(loc="best", fontsize=8)
    else:
        ax.text(0.5, 0.5, "no conjugate points", ha="center", va="center",
                transform=ax.transAxes)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
