"""Figure rendering for experiment reports.

Each preset gets a single PNG next to its CSV: verification performance
against the privacy axis (fig-compare), against the enrolled count
(fig-aucn), empirical versus predicted AUC (fig-theory), the security
figure against the anonymity figure (fig-msem), and theory-vs-empirical
bars for the Bloom baseline. Rendering uses the Agg backend so it works
headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

_SCHEME_ORDER = ("hoa-sum", "hoa-pinv", "aoh-sign", "aoh-majority")


def _by_scheme(rows, key=None):
    groups: dict = {}
    for row in rows:
        label = row["scheme"] if key is None else key(row)
        groups.setdefault(label, []).append(row)
    ordered = sorted(groups.items(), key=lambda kv: str(kv[0]))
    return ordered


def render_preset_figure(name: str, rows, path) -> bool:
    """Render the figure for a preset's result rows; returns False if the
    preset has no figure."""
    if not rows:
        return False
    if name == "fig-compare":
        _render_compare(rows, path)
    elif name == "fig-aucn":
        _render_aucn(rows, path)
    elif name == "fig-theory":
        _render_theory(rows, path)
    elif name == "fig-msem":
        _render_msem(rows, path)
    elif name == "bloom-baseline":
        return _render_bloom(rows, path)
    else:
        return False
    return True


def _render_compare(rows, path):
    fig, ax = plt.subplots(figsize=(6, 4.2))
    for scheme, cells in _by_scheme(rows):
        cells = sorted(cells, key=lambda r: r["sparsity"])
        ax.plot([r["mse_embedding_rel"] for r in cells],
                [r["auc"] for r in cells], marker="o", label=scheme)
    ax.set_xlabel("embedding reconstruction MSE / sigma_x^2")
    ax.set_ylabel("AUC")
    ax.set_title("Single group: verification vs. privacy across sparsities")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _render_aucn(rows, path):
    fig, ax = plt.subplots(figsize=(6, 4.2))
    for scheme, cells in _by_scheme(rows):
        cells = sorted(cells, key=lambda r: r["count"])
        counts = [r["count"] for r in cells]
        ax.plot(counts, [r["auc"] for r in cells], marker="o", label=scheme)
        ax.plot(counts, [r["p_tp_at_fp_1e2"] for r in cells],
                linestyle="--", alpha=0.6)
    ax.set_xscale("log", base=2)
    ax.set_xlabel("enrolled signatures N")
    ax.set_ylabel("AUC (solid) / p_tp at p_fp=1e-2 (dashed)")
    ax.set_title("Single group: performance vs. enrolled count")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _render_theory(rows, path):
    fig, ax = plt.subplots(figsize=(6, 4.2))
    for scheme, cells in _by_scheme(rows):
        cells = sorted(cells, key=lambda r: r["n_min"])
        n_min = [r["n_min"] for r in cells]
        ax.plot(n_min, [r["auc"] for r in cells], marker="o", label=scheme)
        ax.plot(n_min, [r["auc_theory"] for r in cells], linestyle=":",
                marker="x", alpha=0.8)
    ax.set_xscale("log", base=2)
    ax.set_xlabel("smallest group size n_min")
    ax.set_ylabel("AUC (solid: empirical, dotted: predicted)")
    ax.set_title("Multiple groups: measured vs. predicted AUC")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _render_msem(rows, path):
    fig, ax = plt.subplots(figsize=(6, 4.2))
    styles = {"random": "-", "kmeans": "--"}
    key = lambda r: f'{r["scheme"]} / {r["partitioner"]}'
    for label, cells in _by_scheme(rows, key=key):
        cells = sorted(cells, key=lambda r: r["n_min"])
        style = styles.get(cells[0]["partitioner"], "-")
        ax.plot([r["n_min"] for r in cells],
                [r["mse_enrolled_rel"] for r in cells],
                style, marker="o", label=label)
    ax.set_xscale("log", base=2)
    ax.set_xlabel("smallest group size n_min")
    ax.set_ylabel("enrolled-signature MSE / sigma_x^2")
    ax.set_title("Multiple groups: security vs. anonymity")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _render_bloom(rows, path) -> bool:
    row = rows[0]
    if row.get("status") != "ok":
        return False
    pairs = [("pi", "pi_emp"), ("pi0", "pi0_emp"), ("fp_target", "fp_emp")]
    labels = ["code survival", "all-zero code", "false positive"]
    theory = [row[a] for a, _ in pairs]
    emp = [row[b] for _, b in pairs]
    fig, ax = plt.subplots(figsize=(6, 4.2))
    xs = range(len(pairs))
    ax.bar([x - 0.18 for x in xs], theory, width=0.36, label="theory")
    ax.bar([x + 0.18 for x in xs], emp, width=0.36, label="empirical")
    ax.set_xticks(list(xs), labels)
    ax.set_yscale("log")
    floor = min(v for v in theory + emp if v > 0) if any(theory + emp) else 1e-6
    ax.set_ylim(bottom=max(floor / 10, 1e-12))
    ax.set_ylabel("probability")
    ax.set_title(f'Bloom baseline: lambda={row["lambda"]:.3g}, '
                 f'l={row["l"]}, l_B={row["l_b"]}, k={row["k"]}')
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return True


def render_roc_figure(curve, path) -> None:
    """ROC curve figure to accompany the ROC CSV export."""
    fig, ax = plt.subplots(figsize=(4.8, 4.4))
    p_tp = 1.0 - curve.p_fn
    ax.plot(curve.p_fp, p_tp, marker=".", linewidth=1)
    ax.plot([0, 1], [0, 1], linestyle=":", color="gray", alpha=0.6)
    ax.set_xlabel("false-positive rate")
    ax.set_ylabel("true-positive rate")
    ax.set_title(f"ROC (AUC = {curve.auc:.4f})")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
