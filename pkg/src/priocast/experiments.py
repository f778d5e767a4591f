"""Sweep harness: encode, simulate, reconstruct and score over the cross
product of images, priority steps, loss rates, deadlines, policies and
seeds.

Outputs written to the configured directory:

    rows.csv        one row per (image, g, loss, deadline, policy, seed)
    summary.csv     means per (g, loss, deadline, policy) cell
    curves_g<g>.csv per-g curves of the mean metrics over the deadlines
    errors.log      one JSON line per failed row (file absent when clean)
    fig_*.png       rendered curves (see plots.py)

Rows are produced in a deterministic sorted order for fixed inputs and
seeds; failures are recorded and skipped without aborting the run.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import plots
from .codec import serialize
from .config import ExperimentConfig
from .convnet import BuiltinTransform, conv_forward
from .netsim import delivered_prefix_fraction, simulate
from .ppm import read_pixmap
from .reconstruct import inverse_transform, quality, rebuild_latent, reference_latent
from .saliency import detect_saliency

SCHEMA_VERSION = 1

ROW_FIELDS = [
    "schema_version",
    "image",
    "g",
    "loss",
    "deadline",
    "policy",
    "seed",
    "delivered_packets",
    "total_packets",
    "delivered_fraction",
    "prefix_fraction",
    "payload_bytes_delivered",
    "latent_mse",
    "salient_mse",
    "mse",
]

SUMMARY_FIELDS = [
    "schema_version",
    "g",
    "loss",
    "deadline",
    "policy",
    "n",
    "mean_delivered_fraction",
    "mean_payload_bytes",
    "mean_latent_mse",
    "mean_salient_mse",
    "mean_mse",
]


@dataclass
class SweepResult:
    rows: list[dict]
    failures: list[dict]
    out_dir: Path

    @property
    def ok(self) -> bool:
        return not self.failures


def _encode_image(config: ExperimentConfig, path: Path, g: float):
    """Forward transform + saliency + serialization for one (image, g)."""
    image = read_pixmap(path)
    transform = config.make_transform()
    if isinstance(transform, BuiltinTransform):
        latent = transform.forward(image)
    else:
        latent = conv_forward(transform, image)
    provider = config.make_saliency_provider(path)
    saliency = detect_saliency(provider, image, latent)
    bitstream = serialize(latent, saliency, config.codec_config(g))
    return image, bitstream


def run_sweep(config: ExperimentConfig, render_figures: bool = True) -> SweepResult:
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    decoder = config.make_decoder()

    rows: list[dict] = []
    failures: list[dict] = []
    for image_path in config.image_paths:
        for g in config.g_values:
            try:
                original, bitstream = _encode_image(config, image_path, g)
            except Exception as e:  # noqa: BLE001 - recorded, run continues
                failures.append({"image": str(image_path), "g": g, "stage": "encode", "error": str(e)})
                continue
            reference = reference_latent(bitstream)
            shared_map = bitstream.header.saliency()
            for loss in config.loss_values:
                for deadline in config.deadlines:
                    for policy in config.policies:
                        for seed in config.seeds:
                            key = {
                                "image": image_path.name,
                                "g": g,
                                "loss": loss,
                                "deadline": deadline,
                                "policy": policy.value,
                                "seed": seed,
                            }
                            try:
                                link = replace(config.link, loss=loss, seed=seed)
                                trace = simulate(bitstream, link, policy, deadline)
                                subset = [bitstream.packets[s] for s in sorted(trace.delivered)]
                                partial = rebuild_latent(bitstream.header, subset)
                                recon = inverse_transform(decoder, partial)
                                rep = quality(
                                    original,
                                    recon,
                                    shared_map,
                                    trace=trace,
                                    partial=partial,
                                    reference=reference,
                                )
                                prefix_frac, raw_frac = delivered_prefix_fraction(trace)
                                rows.append(
                                    {
                                        "schema_version": SCHEMA_VERSION,
                                        **key,
                                        "delivered_packets": len(trace.delivered),
                                        "total_packets": trace.total_packets,
                                        "delivered_fraction": raw_frac,
                                        "prefix_fraction": prefix_frac,
                                        "payload_bytes_delivered": trace.payload_bytes_delivered,
                                        "latent_mse": rep.latent_mse,
                                        "salient_mse": rep.salient_mse,
                                        "mse": rep.mse,
                                    }
                                )
                            except Exception as e:  # noqa: BLE001
                                failures.append({**key, "stage": "simulate", "error": str(e)})

    rows.sort(key=lambda r: (r["image"], r["g"], r["loss"], r["deadline"], r["policy"], r["seed"]))
    _write_rows(out_dir / "rows.csv", rows)
    summary = _summarize(rows)
    _write_summary(out_dir / "summary.csv", summary)
    _write_curves(out_dir, summary, config.g_values)
    if failures:
        with open(out_dir / "errors.log", "w") as f:
            for item in failures:
                f.write(json.dumps(item, sort_keys=True) + "\n")
    if render_figures:
        plots.render_sweep_figures(summary, out_dir)
    return SweepResult(rows=rows, failures=failures, out_dir=out_dir)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.10g}"
    return v


def _write_rows(path: Path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=ROW_FIELDS)
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(v) for k, v in r.items()})


def _summarize(rows: list[dict]) -> list[dict]:
    cells: dict[tuple, list[dict]] = {}
    for r in rows:
        cells.setdefault((r["g"], r["loss"], r["deadline"], r["policy"]), []).append(r)

    def mean_of(group, field):
        vals = [r[field] for r in group if r[field] is not None]
        return float(np.mean(vals)) if vals else None

    out = []
    for (g, loss, deadline, policy), group in sorted(cells.items()):
        out.append(
            {
                "schema_version": SCHEMA_VERSION,
                "g": g,
                "loss": loss,
                "deadline": deadline,
                "policy": policy,
                "n": len(group),
                "mean_delivered_fraction": mean_of(group, "delivered_fraction"),
                "mean_payload_bytes": mean_of(group, "payload_bytes_delivered"),
                "mean_latent_mse": mean_of(group, "latent_mse"),
                "mean_salient_mse": mean_of(group, "salient_mse"),
                "mean_mse": mean_of(group, "mse"),
            }
        )
    return out


def _write_summary(path: Path, summary: list[dict]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=SUMMARY_FIELDS)
        w.writeheader()
        for r in summary:
            w.writerow({k: _fmt(v) for k, v in r.items()})


def _write_curves(out_dir: Path, summary: list[dict], g_values: list[float]) -> None:
    """One labeled curve file per priority step g."""
    for g in g_values:
        rows = [r for r in summary if r["g"] == g]
        with open(out_dir / f"curves_g{g:g}.csv", "w", newline="") as f:
            w = csv.DictWriter(f, fieldnames=SUMMARY_FIELDS)
            w.writeheader()
            for r in rows:
                w.writerow({k: _fmt(v) for k, v in r.items()})
