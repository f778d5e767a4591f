import csv
import os

import numpy as np
import pytest

from conftest import blob_image
from priocast.cli import main
from priocast.codec import OffloadBitstream
from priocast.config import load_config
from priocast.ppm import read_pixmap, write_pixmap


@pytest.fixture
def image_file(tmp_path, rng):
    path = tmp_path / "img.ppm"
    write_pixmap(blob_image(rng, side=64), path)
    return path


def test_pixmap_roundtrip(tmp_path, rng):
    img = rng.random((3, 10, 12))
    path = tmp_path / "x.ppm"
    write_pixmap(img, path)
    back = read_pixmap(path)
    assert back.shape == img.shape
    assert np.abs(back - img).max() <= 0.5 / 255 + 1e-9
    gray = rng.random((1, 5, 7))
    write_pixmap(gray, tmp_path / "g.pgm")
    assert read_pixmap(tmp_path / "g.pgm").shape == gray.shape


def test_encode_writes_bitstream_and_summary(image_file, tmp_path, capsys):
    out = tmp_path / "img.lnob"
    assert main(["encode", str(image_file), "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "L=12 K=8" in text and "packets=12" in text
    bs = OffloadBitstream.from_bytes(out.read_bytes())
    assert len(bs.packets) == 12


def test_encode_deterministic(image_file, tmp_path):
    a, b = tmp_path / "a.lnob", tmp_path / "b.lnob"
    main(["encode", str(image_file), "--out", str(a)])
    main(["encode", str(image_file), "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_encode_g_changes_packet_order(image_file, tmp_path):
    a, b = tmp_path / "a.lnob", tmp_path / "b.lnob"
    main(["encode", str(image_file), "--out", str(a), "--g", "0"])
    main(["encode", str(image_file), "--out", str(b), "--g", "0.2"])
    ba = OffloadBitstream.from_bytes(a.read_bytes())
    bb = OffloadBitstream.from_bytes(b.read_bytes())
    assert not np.array_equal(ba.header.priority(), bb.header.priority())


def test_transmit_decode_roundtrip(image_file, tmp_path, capsys):
    bs_path = tmp_path / "img.lnob"
    main(["encode", str(image_file), "--out", str(bs_path)])

    out_dir = tmp_path / "tx"
    rc = main(
        ["transmit", str(bs_path), "--policy", "priority_retransmit", "--deadline", "0.2",
         "--seed", "3", "--loss", "0.3", "--out", str(out_dir)]
    )
    assert rc == 0
    trace_lines = (out_dir / "trace.csv").read_text().splitlines()
    assert trace_lines[0] == "time,seq,outcome"
    delivered = [int(x) for x in (out_dir / "delivered.txt").read_text().split()]
    assert delivered == sorted(delivered)

    # Same seed reproduces the same artifacts.
    out2 = tmp_path / "tx2"
    main(["transmit", str(bs_path), "--policy", "priority_retransmit", "--deadline", "0.2",
          "--seed", "3", "--loss", "0.3", "--out", str(out2)])
    assert (out2 / "trace.csv").read_text() == (out_dir / "trace.csv").read_text()

    recon = tmp_path / "recon.ppm"
    capsys.readouterr()
    rc = main(["decode", str(bs_path), "--delivered", str(out_dir / "delivered.txt"),
               "--original", str(image_file), "--out", str(recon)])
    assert rc == 0
    rows = list(csv.DictReader(capsys.readouterr().out.splitlines()))
    assert len(rows) == 1
    assert float(rows[0]["delivered_fraction"]) <= 1.0
    assert recon.exists()


def test_decode_all_gives_zero_latent_mse(image_file, tmp_path, capsys):
    bs_path = tmp_path / "img.lnob"
    main(["encode", str(image_file), "--out", str(bs_path)])
    capsys.readouterr()
    rc = main(["decode", str(bs_path), "--delivered", "all", "--out", str(tmp_path / "r.ppm"),
               "--original", str(image_file)])
    assert rc == 0
    row = next(csv.DictReader(capsys.readouterr().out.splitlines()))
    assert float(row["latent_mse"]) == 0.0
    assert float(row["mse"]) >= 0.0


def test_decode_without_original_reports_latent_metrics_only(image_file, tmp_path, capsys):
    bs_path = tmp_path / "img.lnob"
    main(["encode", str(image_file), "--out", str(bs_path)])
    capsys.readouterr()
    main(["decode", str(bs_path), "--out", str(tmp_path / "r.ppm")])
    row = next(csv.DictReader(capsys.readouterr().out.splitlines()))
    assert row["mse"] == "" and row["latent_mse"] != ""


def test_bd_subcommand(tmp_path, capsys):
    ref = tmp_path / "ref.csv"
    test = tmp_path / "test.csv"
    ref.write_text("rate,quality\n100,10\n200,14\n400,19\n800,22\n")
    test.write_text("rate,quality\n200,10\n400,14\n800,19\n1600,22\n")
    assert main(["bd", str(ref), str(test), "--mode", "rate"]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(100.0, abs=0.01)


def test_cli_error_exit_codes(tmp_path):
    assert main(["encode", str(tmp_path / "missing.ppm"), "--out", str(tmp_path / "x")]) == 2
    bad = tmp_path / "bad.lnob"
    bad.write_bytes(b"not a bitstream")
    assert main(["decode", str(bad), "--out", str(tmp_path / "r.ppm")]) == 2


def _write_sweep_config(tmp_path, images_glob, **overrides):
    cfg = tmp_path / "sweep.ini"
    lines = [
        "[images]",
        f"glob = {images_glob}",
        "[codec]",
        f"g = {overrides.get('g', '0, 0.2, 1.0')}",
        "[link]",
        "bandwidth = 5000",
        "duty = 1.0",
        "window = 100",
        f"loss = {overrides.get('loss', '0')}",
        "overhead_bytes = 0",
        "[run]",
        f"policies = {overrides.get('policies', 'priority_retransmit, index_skip')}",
        f"deadlines = {overrides.get('deadlines', '0.05, 0.2')}",
        f"seeds = {overrides.get('seeds', '0-1')}",
        f"out = {tmp_path / 'out'}",
    ]
    cfg.write_text("\n".join(lines) + "\n")
    return cfg


def test_sweep_outputs_and_monotonicity(tmp_path, rng, capsys):
    for i in range(2):
        write_pixmap(blob_image(rng, side=64), tmp_path / f"img{i}.ppm")
    cfg = _write_sweep_config(tmp_path, f"{tmp_path}/img*.ppm", g="0.2",
                              policies="priority_retransmit",
                              deadlines="0.05, 0.1, 0.3", seeds="0")
    assert main(["sweep", "--config", str(cfg)]) == 0
    out = tmp_path / "out"
    rows = list(csv.DictReader(open(out / "rows.csv")))
    assert rows and rows[0]["schema_version"] == "1"
    assert (out / "summary.csv").exists()
    assert (out / "curves_g0.2.csv").exists()
    assert not (out / "errors.log").exists()
    assert list(out.glob("fig_*.png"))
    # Lossless link: latent_mse is non-increasing in the deadline per image.
    for image in {r["image"] for r in rows}:
        series = [
            float(r["latent_mse"])
            for r in sorted(
                (r for r in rows if r["image"] == image), key=lambda r: float(r["deadline"])
            )
        ]
        assert all(b <= a + 1e-15 for a, b in zip(series, series[1:]))


def test_sweep_g_sweep_emits_labeled_curve_files(tmp_path, rng):
    write_pixmap(blob_image(rng, side=64), tmp_path / "img0.ppm")
    cfg = _write_sweep_config(tmp_path, f"{tmp_path}/img0.ppm",
                              policies="priority_retransmit", deadlines="0.1", seeds="0")
    assert main(["sweep", "--config", str(cfg), "--no-figures"]) == 0
    out = tmp_path / "out"
    for g in ("0", "0.2", "1"):
        assert (out / f"curves_g{g}.csv").exists()


def test_env_override(tmp_path, rng, monkeypatch):
    monkeypatch.setenv("PRIOCAST_CODEC_G", "0.75")
    cfg = load_config(None)
    assert cfg.g_values == [0.75]
    monkeypatch.delenv("PRIOCAST_CODEC_G")


def test_config_validation(tmp_path):
    missing = tmp_path / "nope.ini"
    with pytest.raises(Exception):
        load_config(missing)
    bad = tmp_path / "bad.ini"
    bad.write_text("[codec]\nentropy = arithmetic\n")
    with pytest.raises(Exception):
        load_config(bad)
