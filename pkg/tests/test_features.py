"""Kinematics against closed forms, rendering geometry, augmentation, synthesis."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hsda.errors import ConfigError, DataQualityWarning, ProtocolError
from hsda.features import (
    CHANNEL_NAMES,
    N_CHANNELS,
    SignalMatrix,
    augment,
    compute_channels,
    kinematic_features,
    read_ppm,
    render_image,
    synth_generate,
    write_ppm,
    write_raw_csv,
    write_signal_csv,
)
from hsda.features.augment import _rotate
from hsda.ingest import StrokeSequence, parse_raw

FS = 200.0


def make_stroke(t_ms, x, y, p, label="HC", stats=None):
    return StrokeSequence(
        subject_id="s",
        task_id=1,
        label=label,
        t=np.asarray(t_ms, dtype=np.float64),
        x=np.asarray(x, dtype=np.float64),
        y=np.asarray(y, dtype=np.float64),
        p=np.asarray(p, dtype=np.float64),
        stats=stats or {},
    )


def circle_arrays(r=2.0, omega=3.0, seconds=2.0, fs=FS):
    t = np.arange(int(seconds * fs)) / fs
    return t * 1000.0, r * np.cos(omega * t), r * np.sin(omega * t), 0.5 + 0.1 * t


# ---------------------------------------------------------------------------


class TestKinematics:
    def test_circle_closed_forms(self):
        r, omega = 2.0, 3.0
        t_ms, x, y, p = circle_arrays(r, omega)
        ch = compute_channels(t_ms, x, y, p)
        interior = slice(2, -2)
        np.testing.assert_allclose(ch["speed"][interior], r * omega, rtol=1e-2)
        np.testing.assert_allclose(ch["curvature"][interior], 1.0 / r, rtol=1e-2)
        np.testing.assert_allclose(ch["angular_speed"][interior], omega, rtol=1e-2)

    def test_clockwise_circle_signs(self):
        t = np.arange(400) / FS
        ch = compute_channels(t * 1000.0, np.cos(-2 * t), np.sin(-2 * t), np.ones(400) * 0.5)
        assert np.all(ch["curvature"][2:-2] < 0)
        assert np.all(ch["angular_speed"][2:-2] < 0)

    def test_line_constant_velocity(self):
        t = np.arange(400) / FS
        ch = compute_channels(t * 1000.0, 1.0 + 2.0 * t, 3.0 * t, np.full(400, 0.7))
        np.testing.assert_allclose(ch["speed"], np.hypot(2.0, 3.0), rtol=1e-9)
        np.testing.assert_allclose(ch["acceleration"], 0.0, atol=1e-6)
        np.testing.assert_allclose(ch["curvature"], 0.0, atol=1e-6)

    def test_pressure_ramp(self):
        t = np.arange(400) / FS
        k = 4.2
        ch = compute_channels(t * 1000.0, np.sin(t), np.cos(t), k * t)
        np.testing.assert_allclose(ch["pressure_rate"], k, rtol=1e-9)

    def test_too_short_rejected(self):
        with pytest.raises(ProtocolError, match="5 samples"):
            compute_channels([0, 5, 10, 15], [0, 1, 2, 3], [0, 1, 2, 3], [1, 1, 1, 1])

    def test_nonmonotone_rejected(self):
        with pytest.raises(ProtocolError, match="increasing"):
            compute_channels([0, 5, 5, 15, 20], np.zeros(5), np.zeros(5), np.ones(5))

    def test_signal_matrix_standardized(self):
        t_ms, x, y, p = circle_arrays()
        m = kinematic_features(make_stroke(t_ms, x, y, p))
        assert m.channels.shape == (N_CHANNELS, len(t_ms))
        assert m.channel_names == CHANNEL_NAMES
        assert m.sampling_rate == pytest.approx(FS)
        for i, name in enumerate(CHANNEL_NAMES):
            row = m.channels[i]
            if np.ptp(row) == 0:
                continue
            assert abs(row.mean()) < 1e-6, name
            assert abs(row.std() - 1.0) < 1e-6, name

    def test_angle_unwrap_no_spikes(self):
        # three full revolutions cross the +/- pi seam repeatedly
        t = np.arange(600) / FS
        ch = compute_channels(t * 1000.0, np.cos(2 * np.pi * t), np.sin(2 * np.pi * t), np.ones(600))
        np.testing.assert_allclose(ch["angular_speed"][2:-2], 2 * np.pi, rtol=1e-2)

    def test_write_signal_csv(self, tmp_path):
        t_ms, x, y, p = circle_arrays(seconds=0.1)
        m = kinematic_features(make_stroke(t_ms, x, y, p))
        out = tmp_path / "sig.csv"
        write_signal_csv(m, out)
        lines = out.read_text().splitlines()
        assert lines[0] == ",".join(CHANNEL_NAMES)
        assert len(lines) == 1 + m.T
        parsed = np.loadtxt(out, delimiter=",", skiprows=1)
        np.testing.assert_allclose(parsed.T, m.channels, atol=1e-6)


# ---------------------------------------------------------------------------


class TestRender:
    def test_horizontal_stroke_single_row(self):
        x = np.linspace(0.0, 1.0, 6)
        s = make_stroke(np.arange(6) * 5.0, x, np.zeros(6), np.full(6, 0.5))
        canvas = render_image(s, size=64).pixels
        lit = np.argwhere(canvas.max(axis=0) > 0)
        rows = np.unique(lit[:, 0])
        assert len(rows) == 1
        cols = np.sort(lit[:, 1])
        assert np.array_equal(cols, np.arange(cols[0], cols[-1] + 1))  # contiguous
        assert canvas.max() <= 1.0
        lit_vals = canvas[:, lit[:, 0], lit[:, 1]]
        assert lit_vals.min() >= 0.1 - 1e-12

    def test_background_exactly_zero(self):
        t_ms, x, y, p = circle_arrays()
        canvas = render_image(make_stroke(t_ms, x, y, p), size=64).pixels
        unlit = canvas.max(axis=0) == 0
        assert unlit.any()
        assert np.all(canvas[:, unlit] == 0.0)

    def test_deterministic(self):
        t_ms, x, y, p = circle_arrays()
        a = render_image(make_stroke(t_ms, x, y, p), size=96).pixels
        b = render_image(make_stroke(t_ms, x, y, p), size=96).pixels
        assert np.array_equal(a, b)

    def test_circle_centroid_at_center(self):
        t_ms, x, y, p = circle_arrays(seconds=2.1)
        canvas = render_image(make_stroke(t_ms, x, y, p), size=128).pixels
        lit = np.argwhere(canvas.max(axis=0) > 0)
        centroid = lit.mean(axis=0)
        center = (128 - 1) / 2.0
        assert abs(centroid[0] - center) <= 1.0
        assert abs(centroid[1] - center) <= 1.0

    def test_translation_scale_invariance(self):
        # grid-aligned coordinates keep the affine map exact in binary floats
        rng = np.random.default_rng(4)
        n = 50
        t_ms = np.arange(n) * 5.0
        x = rng.integers(0, 129, size=n) / 64.0
        y = rng.integers(0, 129, size=n) / 64.0
        p = np.full(n, 0.5)
        base = render_image(make_stroke(t_ms, x, y, p), size=64).pixels
        moved = render_image(
            make_stroke(t_ms, 2.0 * x + 8.0, 2.0 * y - 4.0, p), size=64
        ).pixels
        assert np.array_equal(base.max(axis=0) > 0, moved.max(axis=0) > 0)
        np.testing.assert_allclose(base, moved, atol=1e-12)

    def test_degenerate_point_single_pixel(self):
        n = 6
        s = make_stroke(np.arange(n) * 5.0, np.ones(n), np.ones(n), np.full(n, 0.5))
        with pytest.warns(DataQualityWarning):
            canvas = render_image(s, size=32).pixels
        lit = np.argwhere(canvas.max(axis=0) > 0)
        assert len(lit) == 1

    def test_pen_up_segments_not_drawn(self):
        n = 11
        x = np.linspace(0, 1, n)
        p = np.full(n, 0.5)
        p[4:7] = 0.0  # lift the pen mid-stroke
        s = make_stroke(np.arange(n) * 5.0, x, np.zeros(n), p)
        canvas = render_image(s, size=64).pixels
        cols = np.sort(np.unique(np.argwhere(canvas.max(axis=0) > 0)[:, 1]))
        gaps = np.diff(cols)
        assert gaps.max() > 1  # a hole where the pen was up

    def test_ppm_roundtrip(self, tmp_path):
        t_ms, x, y, p = circle_arrays()
        canvas = render_image(make_stroke(t_ms, x, y, p), size=48)
        path = tmp_path / "img.ppm"
        write_ppm(canvas, path)
        data = path.read_bytes()
        assert data.startswith(b"P6\n48 48\n255\n")
        back = read_ppm(path)
        np.testing.assert_allclose(back.pixels, canvas.pixels, atol=1.0 / 255.0 + 1e-12)


# ---------------------------------------------------------------------------


class TestAugment:
    def make_signal(self, T=40, seed=0):
        rng = np.random.default_rng(seed)
        ch = rng.normal(size=(N_CHANNELS, T))
        return SignalMatrix(ch, CHANNEL_NAMES, FS)

    def test_zero_angle_is_identity(self):
        class _StillRng:
            def uniform(self, lo, hi):
                return 0.0

        t_ms, x, y, p = circle_arrays(seconds=0.2)
        s = make_stroke(t_ms, x, y, p)
        out = _rotate(s, _StillRng())
        np.testing.assert_allclose(out.x, s.x, atol=1e-12)
        np.testing.assert_allclose(out.y, s.y, atol=1e-12)

    def test_rotate_preserves_radii(self):
        t_ms, x, y, p = circle_arrays(seconds=0.3)
        s = make_stroke(t_ms, x, y, p)
        out = augment(s, "rotate", seed=5)
        r_in = np.hypot(s.x - s.x.mean(), s.y - s.y.mean())
        r_out = np.hypot(out.x - out.x.mean(), out.y - out.y.mean())
        np.testing.assert_allclose(r_out, r_in, atol=1e-9)
        assert len(out) == len(s)

    def test_rotate_angle_within_bounds(self):
        t_ms, x, y, p = circle_arrays(seconds=0.3)
        s = make_stroke(t_ms, x, y, p)
        for seed in range(10):
            out = augment(s, "rotate", seed=seed)
            dx, dy = s.x - s.x.mean(), s.y - s.y.mean()
            ox, oy = out.x - out.x.mean(), out.y - out.y.mean()
            i = int(np.argmax(np.hypot(dx, dy)))
            ang = np.arctan2(oy[i], ox[i]) - np.arctan2(dy[i], dx[i])
            ang = (ang + np.pi) % (2 * np.pi) - np.pi
            assert abs(np.rad2deg(ang)) <= 15.0 + 1e-9

    def test_scale_factor_in_range(self):
        t_ms, x, y, p = circle_arrays(seconds=0.3)
        s = make_stroke(t_ms, x, y, p)
        out = augment(s, "scale", seed=9)
        f = np.ptp(out.x) / np.ptp(s.x)
        assert 0.9 <= f <= 1.1
        np.testing.assert_allclose(np.ptp(out.y) / np.ptp(s.y), f, atol=1e-9)

    def test_noise_deterministic(self):
        m = self.make_signal()
        a = augment(m, "noise", seed=3).channels
        b = augment(m, "noise", seed=3).channels
        assert np.array_equal(a, b)
        assert not np.array_equal(a, augment(m, "noise", seed=4).channels)

    def test_noise_magnitude(self):
        m = self.make_signal(T=500)
        delta = augment(m, "noise", seed=1).channels - m.channels
        assert 0.005 < delta.std() < 0.02

    def test_window_ops_preserve_shape(self):
        m = self.make_signal(T=57)
        for op in ("window_warp", "window_slice"):
            out = augment(m, op, seed=2)
            assert out.channels.shape == m.channels.shape
            assert out.channel_names == m.channel_names

    def test_window_slice_is_crop_resampled(self):
        # a linear ramp stays a ramp under crop + linear resampling
        T = 50
        ramp = np.tile(np.linspace(0.0, 1.0, T), (N_CHANNELS, 1))
        out = augment(SignalMatrix(ramp, CHANNEL_NAMES, FS), "window_slice", seed=7)
        row = out.channels[0]
        diffs = np.diff(row)
        np.testing.assert_allclose(diffs, diffs[0], atol=1e-9)
        assert row.min() >= 0.0 and row.max() <= 1.0

    def test_substreams_differ(self):
        m = self.make_signal()
        a = augment(m, "noise", seed=3, substream=0).channels
        b = augment(m, "noise", seed=3, substream=1).channels
        assert not np.array_equal(a, b)

    def test_unknown_op_rejected(self):
        with pytest.raises(ConfigError, match="unknown augmentation"):
            augment(self.make_signal(), "shear", seed=0)

    def test_canvas_rejected(self):
        t_ms, x, y, p = circle_arrays(seconds=0.2)
        canvas = render_image(make_stroke(t_ms, x, y, p), size=32)
        with pytest.raises(ConfigError, match="re-render"):
            augment(canvas, "noise", seed=0)

    def test_type_mismatch_rejected(self):
        t_ms, x, y, p = circle_arrays(seconds=0.2)
        s = make_stroke(t_ms, x, y, p)
        with pytest.raises(ConfigError):
            augment(s, "noise", seed=0)
        with pytest.raises(ConfigError):
            augment(self.make_signal(), "rotate", seed=0)

    @given(st.integers(0, 2**31 - 1), st.sampled_from(["noise", "window_warp", "window_slice"]))
    @settings(max_examples=20, deadline=None)
    def test_signal_ops_deterministic_property(self, seed, op):
        m = self.make_signal(T=33, seed=1)
        a = augment(m, op, seed=seed).channels
        b = augment(m, op, seed=seed).channels
        assert np.array_equal(a, b)


# ---------------------------------------------------------------------------


def band_power(v: np.ndarray, fs: float, lo: float, hi: float) -> float:
    # Hann-tapered periodogram; without the taper, leakage from the large
    # low-frequency component buries the tremor band entirely.
    v = (v - v.mean()) * np.hanning(len(v))
    spec = np.abs(np.fft.rfft(v)) ** 2 / len(v)
    freqs = np.fft.rfftfreq(len(v), d=1.0 / fs)
    mask = (freqs >= lo) & (freqs <= hi)
    return float(spec[mask].mean())


class TestSynth:
    def test_balanced_labels(self):
        recs = synth_generate(7, seed=0)
        labels = [label for _, label in recs]
        assert labels.count("HC") == 7 and labels.count("AD") == 7
        for seq, label in recs:
            assert seq.label == label

    def test_sampling_and_duration(self):
        for seq, label in synth_generate(3, seed=1):
            dt = np.diff(seq.t)
            np.testing.assert_allclose(dt, 5.0, atol=1e-9)  # 200 Hz in ms
            lo, hi = (3.8, 5.0) if label == "AD" else (2.0, 3.2)
            assert lo * 200 <= len(seq) <= hi * 200
            assert np.all(seq.p > 0)

    def test_impaired_motor_signature(self):
        # the class cues the generator promises: slower strokes, fatiguing
        # pressure, and a duration gap wide enough to survive augmentation
        recs = synth_generate(8, seed=3)
        speed = {"HC": [], "AD": []}
        slope = {"HC": [], "AD": []}
        length = {"HC": [], "AD": []}
        w = np.ones(25) / 25.0  # 125 ms box kills the tremor band
        for seq, label in recs:
            xs = np.convolve(seq.x, w, mode="valid")
            ys = np.convolve(seq.y, w, mode="valid")
            v = np.hypot(np.diff(xs), np.diff(ys)) * FS
            speed[label].append(np.mean(v))
            u = np.linspace(0.0, 1.0, len(seq))
            slope[label].append(np.polyfit(u, seq.p, 1)[0])
            length[label].append(len(seq))
        assert max(speed["AD"]) < min(speed["HC"])
        assert max(slope["AD"]) < min(slope["HC"])
        assert max(length["HC"]) < min(length["AD"])

    def test_deterministic_bytes(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_raw_csv(synth_generate(4, seed=9), a)
        write_raw_csv(synth_generate(4, seed=9), b)
        assert a.read_bytes() == b.read_bytes()
        write_raw_csv(synth_generate(4, seed=10), b)
        assert a.read_bytes() != b.read_bytes()

    def test_tremor_band_separation(self):
        recs = synth_generate(12, seed=42)
        power = {"HC": [], "AD": []}
        for seq, label in recs:
            px = band_power(seq.x, FS, 8.0, 12.0)
            py = band_power(seq.y, FS, 8.0, 12.0)
            power[label].append(px + py)
        ratio = np.mean(power["AD"]) / np.mean(power["HC"])
        assert ratio >= 3.0

    def test_roundtrip_through_parser(self, tmp_path):
        recs = synth_generate(3, seed=5)
        path = tmp_path / "synth.csv"
        write_raw_csv(recs, path)
        parsed = parse_raw(path)
        assert len(parsed) == len(recs)
        for (seq, label), raw in zip(recs, parsed):
            assert raw.label == label
            assert raw.subject_id == seq.subject_id
            assert len(raw) == len(seq)
            np.testing.assert_allclose(raw.x, seq.x, rtol=1e-6)
            np.testing.assert_allclose(raw.p, seq.p, rtol=1e-6)

    def test_n_per_class_guard(self):
        with pytest.raises(ConfigError):
            synth_generate(0, seed=0)
