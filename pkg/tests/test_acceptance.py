"""Acceptance suite: one test per shipping criterion, run at the stated
tolerances. Each test prints a single pass line (visible with -s or -v)
once its assertions hold; a failure reads as the criterion's FAIL.
"""

import numpy as np
import pytest

from _oracles import conv2d_ref, tconv2d_ref
from conftest import blob_image, make_bitstream, random_conv_layer
from priocast.bd import RQCurve, bd_quality, bd_rate
from priocast.codec import (
    CodecConfig,
    EntropyMode,
    StreamHeader,
    deserialize,
    quantize_latent,
    serialize,
)
from priocast.convnet import BuiltinTransform, ConvNetSpec, LayerKind, Precision, Role, conv_forward
from priocast.netsim import LinkModel, Policy, simulate
from priocast.reconstruct import inverse_transform, latent_mse, quality, rebuild_latent, reference_latent
from priocast.saliency import SaliencyMap, spectral_residual
from priocast.scoring import ChannelOrder, gradual_scoring, priority_order


def _ok(tag, text):
    print(f"[acceptance] {tag} {text}: PASS")


def test_c01_wire_saliency_segment_is_40_bytes():
    # Criterion 1: the transmitted saliency segment is exactly 40 bytes for
    # 500 random images. Exact.
    rng = np.random.default_rng(101)
    t = BuiltinTransform()
    for _ in range(500):
        img = rng.random((3, 64, 64))
        sal = spectral_residual(img, 8)
        bs = serialize(t.forward(img), sal, CodecConfig())
        assert len(bs.header.wire.to_bytes()) == 40
    _ok("C1", "wire saliency segment exactly 40 bytes x500")


def test_c02_order_synchronization_encoder_decoder():
    # Criterion 2: encoder priority order equals the order the decoder
    # recomputes from header bytes, bit-exactly, for 1000 (image, g) cases.
    rng = np.random.default_rng(202)
    t = BuiltinTransform()
    gs = [0.0, 0.2, 1.0]
    for case in range(1000):
        img = blob_image(rng, side=64, noise=0.05)
        latent = t.forward(img)
        sal = spectral_residual(img, 8)
        bs = serialize(latent, sal, CodecConfig(g=gs[case % 3]))
        encoder_order = bs.header.priority()
        decoded, _ = StreamHeader.from_bytes(bs.header.to_bytes())
        assert np.array_equal(decoded.priority(), encoder_order)
    _ok("C2", "priority order synchronized for 1000 (image, g) cases")


def test_c03_container_losslessness_raw_and_huffman():
    # Criterion 3: full-delivery decode reproduces quantized levels exactly
    # for 200 random latents in both modes, plus degenerate latents.
    rng = np.random.default_rng(303)
    for case in range(200):
        z = rng.standard_normal((12, 8, 8)) * rng.uniform(0.1, 3.0)
        sal = SaliencyMap(array=rng.random((8, 8)))
        for mode in (EntropyMode.RAW, EntropyMode.HUFFMAN):
            bs = serialize(z, sal, CodecConfig(entropy=mode))
            np.testing.assert_array_equal(deserialize(bs), quantize_latent(z, bs.header.quant()))
    sal = SaliencyMap(array=np.random.default_rng(1).random((8, 8)))
    for z in (np.zeros((4, 8, 8)), np.full((4, 8, 8), 1.7), np.full((4, 8, 8), -0.4)):
        for mode in (EntropyMode.RAW, EntropyMode.HUFFMAN):
            bs = serialize(z, sal, CodecConfig(entropy=mode))
            np.testing.assert_array_equal(deserialize(bs), quantize_latent(z, bs.header.quant()))
    _ok("C3", "container lossless for 200 random + degenerate latents, both modes")


def test_c04_progressive_monotonicity():
    # Criterion 4: latent MSE is non-increasing over every prefix size and
    # strictly decreasing across packets carrying a nonzero level.
    rng = np.random.default_rng(404)
    for case in range(200):
        z, _, bs = make_bitstream(rng, channels=12, side=8)
        reference = reference_latent(bs)
        order = bs.header.priority()
        levels = quantize_latent(z, bs.header.quant()).reshape(-1)[order]
        prev = latent_mse(rebuild_latent(bs.header, []), reference)
        for n in range(1, len(bs.packets) + 1):
            cur = latent_mse(rebuild_latent(bs.header, bs.packets[:n]), reference)
            assert cur <= prev
            packet_levels = levels[(n - 1) * 64 : n * 64]
            if bs.header.degenerate is False and (packet_levels != 0).any():
                nonzero_value = (
                    np.abs(
                        bs.header.quant().lo
                        + packet_levels * (bs.header.quant().hi - bs.header.quant().lo) / 63
                    ).max()
                    > 0
                )
                if nonzero_value:
                    assert cur < prev
            prev = cur
        assert prev == 0.0
    _ok("C4", "latent MSE monotone over all prefixes, strict on nonzero packets x200")


def test_c05_packet_loss_scenario_mean_payload():
    # Criterion 5: 2.5 KB/s, 0.74 s per 60 s window, 10% loss, one window,
    # priority retransmission: mean delivered payload within +-15% of
    # 1.62 KB over 1000 seeds. Criterion 7's budget check runs per trace.
    rng = np.random.default_rng(505)
    _, _, bs = make_bitstream(rng, channels=12, side=32)
    link = LinkModel(bandwidth=2500.0, duty=0.74 / 60.0, window=60.0, loss=0.10,
                     overhead_bytes=0)
    packet_air = (2 + 48) / 2500.0
    payloads = []
    for seed in range(1000):
        trace = simulate(bs, link.with_seed(seed), Policy.PRIORITY_RETRANSMIT, 60.0)
        assert trace.max_window_airtime() <= link.duty * link.window + packet_air + 1e-9
        payloads.append(trace.payload_bytes_delivered)
    mean = float(np.mean(payloads))
    assert mean == pytest.approx(1620.0, rel=0.15)
    _ok("C5", f"mean delivered payload {mean:.0f} B within 15% of 1620 B over 1000 seeds")


def test_c06_policy_separation_and_c07_budget():
    # Criterion 6: at every budget of a 10-point sweep with 40% loss, the
    # mean saliency-weighted MSE of priority retransmission is <= both
    # index policies, over 50 seeds x 20 images, classical provider.
    # Criterion 7: per-window airtime accounting holds on every trace.
    rng = np.random.default_rng(606)
    t = BuiltinTransform()
    link = LinkModel(bandwidth=2500.0, duty=1.0, window=1e6, loss=0.40, overhead_bytes=0)
    deadlines = np.linspace(0.12, 1.2, 10)
    packet_air = (2 + 48) / 2500.0

    streams = []
    for _ in range(20):
        img = blob_image(rng, side=128)
        latent = t.forward(img)
        sal = spectral_residual(img, 16)
        bs = serialize(latent, sal, CodecConfig())
        streams.append((img, bs, reference_latent(bs), bs.header.saliency()))

    sums = {(d, pol): 0.0 for d in range(len(deadlines)) for pol in Policy}
    for img, bs, reference, shared_map in streams:
        for seed in range(50):
            seeded = link.with_seed(seed)
            for d, deadline in enumerate(deadlines):
                for pol in Policy:
                    trace = simulate(bs, seeded, pol, float(deadline))
                    assert trace.max_window_airtime() <= seeded.duty * seeded.window + packet_air + 1e-9
                    subset = [bs.packets[s] for s in sorted(trace.delivered)]
                    partial = rebuild_latent(bs.header, subset)
                    recon = inverse_transform(t, partial)
                    rep = quality(img, recon, shared_map, trace=trace,
                                  partial=partial, reference=reference)
                    sums[(d, pol)] += rep.salient_mse
    n = 20 * 50
    for d, deadline in enumerate(deadlines):
        mp = sums[(d, Policy.PRIORITY_RETRANSMIT)] / n
        mi = sums[(d, Policy.INDEX_RETRANSMIT)] / n
        ms = sums[(d, Policy.INDEX_SKIP)] / n
        assert mp <= mi + 1e-12, f"budget {deadline:.2f}s: priority {mp} > index_retransmit {mi}"
        assert mp <= ms + 1e-12, f"budget {deadline:.2f}s: priority {mp} > index_skip {ms}"
    _ok("C6", "priority policy's mean salient MSE <= both index policies at all 10 budgets")
    _ok("C7", "per-window airtime within duty budget on every trace of C5/C6")


def test_c08_bd_correctness():
    # Criterion 8: doubled rates -> +100.0% +-0.01 p.p.; identical curves ->
    # exactly 0; reciprocity within 1%.
    rates = [100.0, 250.0, 600.0, 1500.0]
    quals = [11.0, 16.0, 20.0, 23.0]
    ref = RQCurve.from_pairs(zip(rates, quals))
    doubled = RQCurve.from_pairs(zip([2 * r for r in rates], quals))
    assert bd_rate(ref, doubled) == pytest.approx(100.0, abs=0.01)
    assert bd_rate(ref, ref) == 0.0
    assert bd_quality(ref, ref) == 0.0
    rng = np.random.default_rng(808)
    for _ in range(25):
        # Random monotone curves over a shared quality span.
        def rand_curve():
            r = np.sort(rng.uniform(50, 4000, 5))
            q = np.sort(np.linspace(10.0, 30.0, 5) + rng.uniform(-1.0, 1.0, 5))
            return RQCurve.from_pairs(zip(r, q))

        a, b = rand_curve(), rand_curve()
        x, y = bd_rate(a, b), bd_rate(b, a)
        assert (1 + x / 100.0) * (1 + y / 100.0) == pytest.approx(1.0, abs=0.01)
    _ok("C8", "BD deltas: +100% on doubled rates, 0 on identical, reciprocity within 1%")


def test_c09_conv_engine_oracle_100_configs():
    # Criterion 9: forward (conv) and inverse (transposed conv) layers match
    # the nested-loop reference within 1e-5 for 100 random configurations
    # covering kernels {3, 5, 7} and strides {1, 2}.
    rng = np.random.default_rng(909)
    kernels = [3, 5, 7]
    strides = [1, 2]
    for case in range(100):
        k = kernels[case % 3]
        s = strides[(case // 3) % 2]
        kind = LayerKind.CONV if case % 2 == 0 else LayerKind.TCONV
        cin = int(rng.integers(1, 4))
        cout = int(rng.integers(1, 4))
        layer = random_conv_layer(rng, kind, cin, cout, k, s)
        spec = ConvNetSpec(role=Role.ENCODER, precision=Precision.FLOAT32, layers=[layer])
        x = rng.random((cin, 8, 8))
        got = conv_forward(spec, x)
        w = layer.weights.reshape(cout, cin, k, k)
        ref = conv2d_ref(x, w, s) if kind == LayerKind.CONV else tconv2d_ref(x, w, s)
        np.testing.assert_allclose(got, ref + layer.bias[:, None, None], atol=1e-5)
    _ok("C9", "conv/tconv match the nested-loop oracle within 1e-5 for 100 configs")


def test_c10_gradual_scoring_regimes():
    # Criterion 10: g = 0 orders by saliency alone with channels interleaved
    # at each position; g > max - min orders whole channel blocks.
    rng = np.random.default_rng(1010)
    L = 5
    for _ in range(50):
        m = rng.random((8, 8))
        per = m.size

        order0 = priority_order(gradual_scoring(m, L, 0.0, ChannelOrder.DESCENDING))
        groups = order0.reshape(-1, L)
        assert (groups // per == np.arange(L)).all()  # channels interleave 0..L-1
        assert (groups % per == groups[:, :1] % per).all()  # same spatial position
        spatial_vals = m.reshape(-1)[groups[:, 0] % per]
        assert (np.diff(spatial_vals) <= 0).all()  # positions by saliency alone

        g = (m.max() - m.min()) * 1.000001
        orderg = priority_order(gradual_scoring(m, L, g, ChannelOrder.DESCENDING))
        blocks = orderg.reshape(L, per) // per
        assert (blocks == np.arange(L)[:, None]).all()  # whole channels in order
    _ok("C10", "g=0 interleaves channels by saliency; large g blocks whole channels")
