"""Log-log convergence figures rendered next to the delimited output."""

from __future__ import annotations

import math

__all__ = ["render_convergence_figure"]

_MARKERS = ("o", "s", "^", "d", "v", "*", "x")


def render_convergence_figure(report, path):
    """Render error against step size per (method, K) group, with a slope-2 guide."""
    import matplotlib

    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    groups = {}
    for cell in report.cells:
        groups.setdefault((cell.method, cell.K), []).append(cell)

    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    guide_anchor = None
    for idx, ((method, K), cells) in enumerate(sorted(groups.items())):
        cells = sorted(cells, key=lambda c: c.h)
        h = [c.h for c in cells]
        err = [c.error for c in cells]
        finite = [(a, b) for a, b in zip(h, err) if math.isfinite(b) and b > 0]
        if not finite:
            continue
        fh, ferr = zip(*finite)
        fit = report.fit_for(method, K)
        label = f"{method}, K={K}"
        if fit is not None and math.isfinite(fit.order):
            label += f" (order {fit.order:.2f})"
        ax.loglog(fh, ferr, marker=_MARKERS[idx % len(_MARKERS)], label=label)
        if guide_anchor is None:
            mid = len(fh) // 2
            guide_anchor = (fh[mid], ferr[mid])
    if guide_anchor is not None:
        h0, e0 = guide_anchor
        hs = [h0 / 4.0, h0 * 4.0]
        ax.loglog(hs, [e0 * (x / h0) ** 2 for x in hs], "k--", lw=0.8, label="slope 2")
    ax.set_xlabel("step size h")
    ax.set_ylabel("error in the H2 x H1 pair norm")
    ax.grid(True, which="both", alpha=0.4)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
