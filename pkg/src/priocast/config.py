"""Experiment configuration: flat INI files plus environment overrides.

Schema (all keys optional unless noted; comma lists where plural):

    [images]
    glob = images/*.ppm          ; required for sweeps

    [codec]
    transform = builtin          ; or weights:<encoder.lnwf>,<decoder.lnwf>
    saliency = classical         ; or file:<map.lnsm> or cnn:<branch.lnwf>
    g = 0.2                      ; list sweeps the priority step
    channel_order = descending   ; or ascending
    entropy = raw                ; or huffman
    payload_bytes = 48
    block = 8                    ; built-in transform cell size
    latent_channels = 12

    [link]
    bandwidth = 2500             ; bytes per second, or "gamma"
    duty = 0.0123333333334       ; airtime fraction of each window
    window = 60
    loss = 0.1                   ; list sweeps the loss rate
    overhead_bytes = 0
    seed = 0

    [gamma]                      ; used when bandwidth = gamma
    shape = 2.0
    scale = 3125
    min = 300
    max = 50000
    interval = 1.0

    [run]
    policies = priority_retransmit, index_retransmit, index_skip
    deadlines = 60               ; seconds, list
    seeds = 0-49                 ; list and/or dash ranges
    out = sweep_out              ; output directory

Any key can be overridden with PRIOCAST_<SECTION>_<KEY>, e.g.
``PRIOCAST_LINK_LOSS=0.4``.

The defaults mirror the packet-loss study that ships with the repo: a
2.5 KB/s link with 0.74 s of airtime per 60 s window, one window, loss
rates {0.10, 0.40, 0.70}. Per-packet overhead defaults to 0 here (the
byte budget abstracts the PHY frame) while the library-level LinkModel
default stays 13 bytes.
"""

from __future__ import annotations

import configparser
import glob as globmod
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

from .codec import CodecConfig, EntropyMode
from .convnet import BuiltinTransform
from .errors import ConfigError
from .netsim import GammaBandwidth, LinkModel, Policy
from .saliency import ClassicalSaliency, CnnSaliency, FileSaliency
from .scoring import ChannelOrder
from .weights_io import load_weights_file

log = logging.getLogger("priocast")

ENV_PREFIX = "PRIOCAST"

DEFAULTS = {
    "images": {"glob": ""},
    "codec": {
        "transform": "builtin",
        "saliency": "classical",
        "g": "0.2",
        "channel_order": "descending",
        "entropy": "raw",
        "payload_bytes": "48",
        "block": "8",
        "latent_channels": "12",
    },
    "link": {
        "bandwidth": "2500",
        "duty": "0.0123333333333334",
        "window": "60",
        "loss": "0.1, 0.4, 0.7",
        "overhead_bytes": "0",
        "seed": "0",
    },
    "gamma": {"shape": "2.0", "scale": "3125", "min": "300", "max": "50000", "interval": "1.0"},
    "run": {
        "policies": "priority_retransmit, index_retransmit, index_skip",
        "deadlines": "60",
        "seeds": "0-9",
        "out": "sweep_out",
    },
}


def _parse_floats(text: str) -> list[float]:
    return [float(t) for t in text.replace(",", " ").split()]


def _parse_seeds(text: str) -> list[int]:
    out = []
    for tok in text.replace(",", " ").split():
        if "-" in tok[1:]:
            a, b = tok.split("-", 1)
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(tok))
    if not out:
        raise ConfigError("seeds list is empty")
    return out


@dataclass
class ExperimentConfig:
    image_paths: list[Path]
    transform_kind: str  # "builtin" | "weights"
    encoder_path: Path | None
    decoder_path: Path | None
    saliency_kind: str  # "classical" | "file" | "cnn"
    saliency_path: Path | None
    g_values: list[float]
    channel_order: ChannelOrder
    entropy: int
    payload_bytes: int
    block: int
    latent_channels: int
    link: LinkModel
    loss_values: list[float]
    policies: list[Policy]
    deadlines: list[float]
    seeds: list[int]
    out_dir: Path
    raw: configparser.ConfigParser = field(repr=False, default=None)

    def codec_config(self, g: float) -> CodecConfig:
        return CodecConfig(
            g=g,
            channel_order=self.channel_order,
            entropy=self.entropy,
            payload_bytes=self.payload_bytes,
        )

    def make_transform(self):
        if self.transform_kind == "builtin":
            return BuiltinTransform(block=self.block, channels=self.latent_channels)
        return load_weights_file(self.encoder_path)

    def make_decoder(self):
        if self.transform_kind == "builtin":
            return BuiltinTransform(block=self.block, channels=self.latent_channels)
        return load_weights_file(self.decoder_path)

    def make_saliency_provider(self, image_path=None):
        if self.saliency_kind == "classical":
            return ClassicalSaliency()
        if self.saliency_kind == "file":
            return FileSaliency(self.saliency_path)
        if self.saliency_kind == "maps":
            # Per-image precomputed maps: <dir>/<image stem>.lnsm, falling
            # back to the classical detector when an image has none.
            candidate = None
            if image_path is not None:
                candidate = Path(self.saliency_path) / (Path(image_path).stem + ".lnsm")
            if candidate is not None and candidate.exists():
                return FileSaliency(candidate)
            log.info("no saliency map for %s, falling back to the classical detector", image_path)
            return ClassicalSaliency()
        spec = load_weights_file(self.saliency_path)
        return CnnSaliency(spec)


def _apply_env(parser: configparser.ConfigParser, env) -> None:
    for key, value in env.items():
        if not key.startswith(ENV_PREFIX + "_"):
            continue
        parts = key[len(ENV_PREFIX) + 1 :].lower().split("_", 1)
        if len(parts) != 2:
            continue
        section, option = parts
        if section in parser:
            parser[section][option] = value


def load_config(path=None, env=None, overrides=None) -> ExperimentConfig:
    """Parse an INI file (optional), then apply environment variables and
    finally explicit overrides ({(section, key): value}), strongest last."""
    parser = configparser.ConfigParser()
    parser.read_dict(DEFAULTS)
    if path is not None:
        read = parser.read(path)
        if not read:
            raise ConfigError(f"config file not found: {path}")
    _apply_env(parser, os.environ if env is None else env)
    for (section, key), value in (overrides or {}).items():
        parser[section][key] = value

    pattern = parser["images"]["glob"]
    image_paths = sorted(Path(p) for p in globmod.glob(pattern)) if pattern else []
    if pattern and not image_paths:
        raise ConfigError(f"image glob matched nothing: {pattern}")

    codec = parser["codec"]
    transform = codec["transform"].strip()
    encoder_path = decoder_path = None
    if transform.startswith("weights:"):
        parts = transform[len("weights:") :].split(",")
        if len(parts) != 2:
            raise ConfigError("transform = weights:<encoder>,<decoder>")
        encoder_path, decoder_path = (Path(p.strip()) for p in parts)
        for p in (encoder_path, decoder_path):
            if not p.exists():
                raise ConfigError(f"weights file not found: {p}")
        transform_kind = "weights"
    elif transform == "builtin":
        transform_kind = "builtin"
    else:
        raise ConfigError(f"unknown transform {transform!r}")

    saliency = codec["saliency"].strip()
    saliency_path = None
    if saliency == "classical":
        saliency_kind = "classical"
    elif saliency.startswith(("file:", "cnn:", "maps:")):
        saliency_kind, _, rest = saliency.partition(":")
        saliency_path = Path(rest.strip())
        if not saliency_path.exists():
            raise ConfigError(f"saliency file not found: {saliency_path}")
    else:
        raise ConfigError(f"unknown saliency provider {saliency!r}")

    order = codec["channel_order"].strip().lower()
    if order not in ("descending", "ascending"):
        raise ConfigError(f"channel_order must be ascending or descending, got {order!r}")
    entropy_name = codec["entropy"].strip().lower()
    if entropy_name not in ("raw", "huffman"):
        raise ConfigError(f"entropy must be raw or huffman, got {entropy_name!r}")

    link_sec = parser["link"]
    bandwidth_text = link_sec["bandwidth"].strip().lower()
    gamma = None
    bandwidth = 2500.0
    if bandwidth_text == "gamma":
        gs = parser["gamma"]
        gamma = GammaBandwidth(
            shape=float(gs["shape"]),
            scale=float(gs["scale"]),
            lo=float(gs["min"]),
            hi=float(gs["max"]),
            interval=float(gs["interval"]),
        )
    else:
        bandwidth = float(bandwidth_text)
    link = LinkModel(
        bandwidth=bandwidth,
        gamma=gamma,
        duty=float(link_sec["duty"]),
        window=float(link_sec["window"]),
        loss=0.0,  # swept separately
        overhead_bytes=int(link_sec["overhead_bytes"]),
        seed=int(link_sec["seed"]),
    )

    run = parser["run"]
    policies = [Policy(p.strip()) for p in run["policies"].split(",") if p.strip()]
    if not policies:
        raise ConfigError("policies list is empty")

    return ExperimentConfig(
        image_paths=image_paths,
        transform_kind=transform_kind,
        encoder_path=encoder_path,
        decoder_path=decoder_path,
        saliency_kind=saliency_kind,
        saliency_path=saliency_path,
        g_values=_parse_floats(codec["g"]),
        channel_order=ChannelOrder.DESCENDING if order == "descending" else ChannelOrder.ASCENDING,
        entropy=EntropyMode.RAW if entropy_name == "raw" else EntropyMode.HUFFMAN,
        payload_bytes=int(codec["payload_bytes"]),
        block=int(codec["block"]),
        latent_channels=int(codec["latent_channels"]),
        link=link,
        loss_values=_parse_floats(link_sec["loss"]),
        policies=policies,
        deadlines=_parse_floats(run["deadlines"]),
        seeds=_parse_seeds(run["seeds"]),
        out_dir=Path(run["out"]),
        raw=parser,
    )
