"""Command-line interface: encode, transmit, decode, sweep, bd.

Every command is deterministic given its inputs, configuration and seed.
Configuration comes from an INI file (see config.py for the schema);
direct flags override the file, and any key can also be overridden via
PRIOCAST_<SECTION>_<KEY> environment variables.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

from . import bd as bdmod
from .codec import OffloadBitstream, serialize
from .config import load_config
from .convnet import BuiltinTransform, conv_forward
from .errors import PriocastError
from .experiments import SCHEMA_VERSION, run_sweep
from .netsim import Policy, simulate, write_trace_csv
from .ppm import read_pixmap, write_pixmap
from .reconstruct import inverse_transform, quality, rebuild_latent, reference_latent
from .saliency import detect_saliency

REPORT_FIELDS = [
    "schema_version",
    "bitstream",
    "delivered_packets",
    "total_packets",
    "delivered_fraction",
    "latent_mse",
    "salient_mse",
    "mse",
]


def _add_codec_flags(p: argparse.ArgumentParser):
    p.add_argument("--g", type=float, help="priority step between channels")
    p.add_argument("--channel-order", choices=["descending", "ascending"])
    p.add_argument("--entropy", choices=["raw", "huffman"])
    p.add_argument("--payload-bytes", type=int)
    p.add_argument("--saliency", help="classical | file:<map.lnsm> | cnn:<branch.lnwf>")
    p.add_argument("--transform", help="builtin | weights:<encoder.lnwf>,<decoder.lnwf>")


def _config_with_overrides(args):
    overrides = {}
    if getattr(args, "g", None) is not None:
        overrides[("codec", "g")] = str(args.g)
    if getattr(args, "channel_order", None):
        overrides[("codec", "channel_order")] = args.channel_order
    if getattr(args, "entropy", None):
        overrides[("codec", "entropy")] = args.entropy
    if getattr(args, "payload_bytes", None) is not None:
        overrides[("codec", "payload_bytes")] = str(args.payload_bytes)
    if getattr(args, "saliency", None):
        overrides[("codec", "saliency")] = args.saliency
    if getattr(args, "transform", None):
        overrides[("codec", "transform")] = args.transform
    if getattr(args, "loss", None) is not None:
        overrides[("link", "loss")] = str(args.loss)
    if getattr(args, "out", None) is not None and getattr(args, "command", "") == "sweep":
        overrides[("run", "out")] = str(args.out)
    return load_config(getattr(args, "config", None), overrides=overrides)


def cmd_encode(args) -> int:
    cfg = _config_with_overrides(args)
    image = read_pixmap(args.image)
    transform = cfg.make_transform()
    if isinstance(transform, BuiltinTransform):
        latent = transform.forward(image)
    else:
        latent = conv_forward(transform, image)
    provider = cfg.make_saliency_provider(args.image)
    saliency = detect_saliency(provider, image, latent)
    g = cfg.g_values[0]
    bitstream = serialize(latent, saliency, cfg.codec_config(g))
    data = bitstream.to_bytes()
    args.out.write_bytes(data)
    h = bitstream.header
    print(
        f"L={h.channels} K={h.side} g={h.g:g} entropy={'huffman' if h.entropy else 'raw'} "
        f"packets={len(bitstream.packets)} payload={bitstream.payload_bytes}B "
        f"total_bytes={len(data)}"
    )
    return 0


def _link_from_config(cfg, args):
    link = cfg.link
    if getattr(args, "loss", None) is not None:
        link = replace(link, loss=args.loss)
    if getattr(args, "seed", None) is not None:
        link = replace(link, seed=args.seed)
    return link


def cmd_transmit(args) -> int:
    cfg = load_config(args.config)
    bitstream = OffloadBitstream.from_bytes(Path(args.bitstream).read_bytes())
    link = _link_from_config(cfg, args)
    trace = simulate(bitstream, link, Policy(args.policy), args.deadline)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_trace_csv(trace, out / "trace.csv")
    with open(out / "delivered.txt", "w") as f:
        for seq in sorted(trace.delivered):
            f.write(f"{seq}\n")
    print(
        f"delivered={len(trace.delivered)}/{trace.total_packets} "
        f"payload_bytes={trace.payload_bytes_delivered} "
        f"header_attempts={trace.header_attempts}"
    )
    return 0


def _read_delivered(path_or_all: str, bitstream: OffloadBitstream):
    if path_or_all == "all":
        return list(bitstream.packets)
    seqs = []
    for line in Path(path_or_all).read_text().split():
        seqs.append(int(line))
    return [bitstream.packets[s] for s in sorted(set(seqs))]


def cmd_decode(args) -> int:
    cfg = _config_with_overrides(args)
    bitstream = OffloadBitstream.from_bytes(Path(args.bitstream).read_bytes())
    subset = _read_delivered(args.delivered, bitstream)
    partial = rebuild_latent(bitstream.header, subset)
    decoder = cfg.make_decoder()
    recon = inverse_transform(decoder, partial)
    write_pixmap(recon, args.out)
    original = read_pixmap(args.original) if args.original else None
    rep = quality(
        original,
        recon if original is not None else None,
        bitstream.header.saliency(),
        partial=partial,
        reference=reference_latent(bitstream),
    )
    row = {
        "schema_version": SCHEMA_VERSION,
        "bitstream": str(args.bitstream),
        "delivered_packets": len(subset),
        "total_packets": len(bitstream.packets),
        "delivered_fraction": f"{partial.delivered_fraction:.10g}",
        "latent_mse": "" if rep.latent_mse is None else f"{rep.latent_mse:.10g}",
        "salient_mse": "" if rep.salient_mse is None else f"{rep.salient_mse:.10g}",
        "mse": "" if rep.mse is None else f"{rep.mse:.10g}",
    }
    writer = csv.DictWriter(sys.stdout, fieldnames=REPORT_FIELDS)
    writer.writeheader()
    writer.writerow(row)
    if args.report:
        new = not Path(args.report).exists()
        with open(args.report, "a", newline="") as f:
            w = csv.DictWriter(f, fieldnames=REPORT_FIELDS)
            if new:
                w.writeheader()
            w.writerow(row)
    return 0


def cmd_sweep(args) -> int:
    cfg = _config_with_overrides(args)
    result = run_sweep(cfg, render_figures=not args.no_figures)
    print(f"rows={len(result.rows)} failures={len(result.failures)} out={result.out_dir}")
    if not result.ok:
        print(f"error log: {result.out_dir / 'errors.log'}", file=sys.stderr)
        return 1
    return 0


def cmd_bd(args) -> int:
    ref = bdmod.read_curve_csv(args.reference)
    test = bdmod.read_curve_csv(args.test)
    if args.mode == "rate":
        print(f"{bdmod.bd_rate(ref, test):.6f}")
    else:
        print(f"{bdmod.bd_quality(ref, test):.6f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="priocast",
        description="Saliency-prioritized progressive image offloading codec and link simulator.",
        epilog="Any config key can be overridden via PRIOCAST_<SECTION>_<KEY> environment variables.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="encode a PPM image into a priority-ordered bitstream")
    p.add_argument("image", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--config", type=Path, help="INI configuration file")
    _add_codec_flags(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("transmit", help="simulate transmitting a bitstream over a lossy link")
    p.add_argument("bitstream", type=Path)
    p.add_argument("--config", type=Path)
    p.add_argument("--policy", choices=[pol.value for pol in Policy], required=True)
    p.add_argument("--deadline", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--loss", type=float)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_transmit)

    p = sub.add_parser("decode", help="reconstruct an image from delivered packets")
    p.add_argument("bitstream", type=Path)
    p.add_argument("--delivered", default="all", help='"all" or a file of delivered seq numbers')
    p.add_argument("--original", type=Path, help="original image for pixel metrics")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--report", type=Path, help="append the quality row to this CSV")
    p.add_argument("--config", type=Path, help="INI configuration file")
    _add_codec_flags(p)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("sweep", help="run the experiment matrix from a config file")
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--out", type=Path, help="override the output directory")
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    _add_codec_flags(p)
    p.add_argument("--loss", type=float)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bd", help="Bjontegaard delta between two rate-quality CSV curves")
    p.add_argument("reference", type=Path)
    p.add_argument("test", type=Path)
    p.add_argument("--mode", choices=["rate", "quality"], default="rate")
    p.set_defaults(func=cmd_bd)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PriocastError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
