"""Figure rendering for sweep reports.

For every (g, loss) cell the summary contains, one PNG per metric is
written next to the CSVs: mean metric over the deadline axis, one line
per transmission policy. Rendering uses the Agg backend so it works
headless; CSVs remain the machine-readable contract, the figures are the
human-readable view of the same numbers.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

METRICS = [
    ("mean_salient_mse", "saliency-weighted MSE"),
    ("mean_latent_mse", "latent MSE"),
    ("mean_delivered_fraction", "delivered fraction"),
]


def render_sweep_figures(summary: list[dict], out_dir: Path) -> list[Path]:
    out_dir = Path(out_dir)
    written = []
    cells = sorted({(r["g"], r["loss"]) for r in summary})
    for g, loss in cells:
        rows = [r for r in summary if r["g"] == g and r["loss"] == loss]
        policies = sorted({r["policy"] for r in rows})
        for field, label in METRICS:
            if all(r[field] is None for r in rows):
                continue
            fig, ax = plt.subplots(figsize=(5.5, 3.5))
            for policy in policies:
                pts = sorted(
                    [(r["deadline"], r[field]) for r in rows if r["policy"] == policy and r[field] is not None]
                )
                if pts:
                    ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=policy)
            ax.set_xlabel("deadline (s)")
            ax.set_ylabel(label)
            ax.set_title(f"g={g:g}, loss={loss:g}")
            ax.grid(True, alpha=0.3)
            ax.legend(fontsize=8)
            fig.tight_layout()
            path = out_dir / f"fig_{field.removeprefix('mean_')}_g{g:g}_loss{loss:g}.png"
            fig.savefig(path, dpi=120)
            plt.close(fig)
            written.append(path)
    return written
