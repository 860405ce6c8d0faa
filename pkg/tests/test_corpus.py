"""Procedural corpus: profiles, tire response, textures, files, manifest."""

import numpy as np
import pytest

from roadfeel.corpus import (
    DatasetManifest,
    build_corpus,
    load_pairs,
    resolve_counts,
    split_sizes,
    synthesize_session,
)
from roadfeel.errors import ManifestIntegrityError
from roadfeel.corpus import formats
from roadfeel.corpus.profiles import (
    CLASS_ORDER,
    LightCondition,
    RoadClass,
    RoadProfile,
    RoadProfileParams,
    synthesize_road_profile,
)
from roadfeel.corpus.textures import render_texture_image
from roadfeel.corpus.tire import simulate_tire_response


# ---------------------------------------------------------------------------
# road profiles


def test_profile_deterministic():
    a = synthesize_road_profile(RoadClass.ASPHALT, 20.0, 0.02, seed=7)
    b = synthesize_road_profile(RoadClass.ASPHALT, 20.0, 0.02, seed=7)
    np.testing.assert_array_equal(a.elevation, b.elevation)
    assert a.elevation.size == 1000


def test_profile_gravel_rougher_than_asphalt_every_seed():
    for seed in range(100):
        g = synthesize_road_profile(RoadClass.GRAVEL, 20.0, 0.02, seed)
        a = synthesize_road_profile(RoadClass.ASPHALT, 20.0, 0.02, seed)
        assert np.sqrt(np.mean(g.elevation**2)) > np.sqrt(np.mean(a.elevation**2))


def test_profile_psd_slope_matches_exponent():
    # pure power-law params; periodogram log-log regression recovers the slope
    params = RoadProfileParams(psd_magnitude=1e-5, psd_exponent=2.0, micro_texture_scale=0.0)
    prof = synthesize_road_profile(RoadClass.ASPHALT, 100.0, 0.01, seed=3, params=params)
    n = prof.elevation.size
    freqs = np.fft.rfftfreq(n, d=0.01)
    periodogram = (np.abs(np.fft.rfft(prof.elevation)) ** 2) * 2 * 0.01 / n
    band = (freqs > 0.05) & (freqs < 10.0)
    slope = np.polyfit(np.log(freqs[band]), np.log(periodogram[band]), 1)[0]
    assert slope == pytest.approx(-2.0, abs=0.3)


def test_profile_rejects_bad_dimensions():
    with pytest.raises(ValueError):
        synthesize_road_profile(RoadClass.DIRT, -1.0, 0.01, 0)
    with pytest.raises(ValueError):
        synthesize_road_profile(RoadClass.DIRT, 10.0, 0.0, 0)


# ---------------------------------------------------------------------------
# tire response


def test_tire_zero_profile_leaves_noise_floor():
    flat = RoadProfile(elevation=np.zeros(3000), resolution_m=0.01)
    stream = simulate_tire_response(flat, 10.0, 500.0, seed=5)
    assert np.sqrt(np.mean(stream.data**2)) < 0.05


def test_tire_response_linearity():
    prof = synthesize_road_profile(RoadClass.CEMENT, 30.0, 0.01, seed=1)
    double = RoadProfile(elevation=2.0 * prof.elevation, resolution_m=0.01)
    r1 = simulate_tire_response(prof, 10.0, 500.0, noise_rms=0.0)
    r2 = simulate_tire_response(double, 10.0, 500.0, noise_rms=0.0)
    assert np.max(np.abs(r2.data - 2.0 * r1.data)) < 1e-9


def test_tire_sinusoid_maps_spatial_period_to_frequency():
    # 1 m spatial period at 10 m/s -> 10 Hz dominant response
    x = np.arange(3000) * 0.01
    prof = RoadProfile(elevation=0.002 * np.sin(2 * np.pi * x / 1.0), resolution_m=0.01)
    stream = simulate_tire_response(prof, 10.0, 500.0, noise_rms=0.0)
    spectrum = np.abs(np.fft.rfft(stream.data[0]))
    freqs = np.fft.rfftfreq(stream.data.shape[1], d=1 / 500.0)
    peak = freqs[1:][np.argmax(spectrum[1:])]
    assert peak == pytest.approx(10.0, abs=0.2)


def test_signal_rms_follows_roughness_ordering():
    """Mean tire-response RMS over 100 seeds per class tracks the documented
    roughness ordering: asphalt < cement < brick < dirt < muddy <= gravel."""
    ordering = (
        RoadClass.ASPHALT,
        RoadClass.CEMENT,
        RoadClass.BRICK,
        RoadClass.DIRT,
        RoadClass.MUDDY,
        RoadClass.GRAVEL,
    )
    means = []
    for cls in ordering:
        rms = []
        for seed in range(100):
            prof = synthesize_road_profile(cls, 30.0, 0.01, seed)
            stream = simulate_tire_response(prof, 10.0, 500.0, seed=seed, noise_rms=0.0)
            rms.append(np.sqrt(np.mean(stream.data**2)))
        means.append(float(np.mean(rms)))
    for lo, hi in zip(means[:-2], means[1:-1]):
        assert lo < hi
    assert means[-2] <= means[-1]  # muddy <= gravel


def test_tire_rejects_bad_speed():
    prof = synthesize_road_profile(RoadClass.DIRT, 10.0, 0.01, 0)
    with pytest.raises(ValueError):
        simulate_tire_response(prof, 0.0, 500.0)


# ---------------------------------------------------------------------------
# textures


def test_texture_deterministic():
    a = render_texture_image(RoadClass.BRICK, LightCondition.DAY, seed=11)
    b = render_texture_image(RoadClass.BRICK, LightCondition.DAY, seed=11)
    np.testing.assert_array_equal(a.image, b.image)
    assert a.image.shape == (64, 64, 3)
    assert a.image.min() >= 0.0 and a.image.max() <= 1.0


def test_texture_night_darker_than_day_every_class_and_seed():
    for cls in CLASS_ORDER:
        for seed in range(50):
            day = render_texture_image(cls, LightCondition.DAY, seed).image.mean()
            night = render_texture_image(cls, LightCondition.NIGHT, seed).image.mean()
            assert night < day


def test_texture_classes_separable_by_nearest_centroid():
    """Mean color + gradient energy must separate the six classes: a
    nearest-centroid classifier (one centroid per class and light, predicting
    the centroid's class) exceeds 0.9 accuracy on 600 rendered images."""

    def features(img):
        gray = img.mean(axis=2)
        grad = np.mean(np.abs(np.diff(gray, axis=0))) + np.mean(np.abs(np.diff(gray, axis=1)))
        return [img[:, :, 0].mean(), img[:, :, 1].mean(), img[:, :, 2].mean(), grad]

    X, y, light_idx = [], [], []
    for ci, cls in enumerate(CLASS_ORDER):
        for li, light in enumerate((LightCondition.DAY, LightCondition.NIGHT)):
            for seed in range(50):
                X.append(features(render_texture_image(cls, light, seed).image))
                y.append(ci)
                light_idx.append(li)
    X, y, light_idx = np.array(X), np.array(y), np.array(light_idx)
    X = (X - X.mean(axis=0)) / X.std(axis=0)

    centroids, labels = [], []
    for ci in range(6):
        for li in range(2):
            centroids.append(X[(y == ci) & (light_idx == li)].mean(axis=0))
            labels.append(ci)
    centroids, labels = np.array(centroids), np.array(labels)
    nearest = np.argmin(((X[:, None, :] - centroids[None]) ** 2).sum(axis=-1), axis=1)
    accuracy = float((labels[nearest] == y).mean())
    assert accuracy > 0.9


def test_texture_rejects_tiny_images():
    with pytest.raises(ValueError):
        render_texture_image(RoadClass.ASPHALT, LightCondition.DAY, 0, size=(16, 16))


# ---------------------------------------------------------------------------
# file formats


def test_vts1_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    data = rng.normal(size=(2, 777))
    path = tmp_path / "sig.vts1"
    formats.write_signal(path, data, fs=500.0)
    back, fs = formats.read_signal(path)
    assert fs == 500.0
    np.testing.assert_array_equal(back, data.astype(np.float32).astype(np.float64))
    assert path.read_bytes()[:4] == b"VTS1"


def test_vts1_rejects_bad_magic(tmp_path):
    path = tmp_path / "sig.vts1"
    formats.write_signal(path, np.zeros((1, 10)), fs=500.0)
    raw = bytearray(path.read_bytes())
    raw[:4] = b"XXXX"
    path.write_bytes(bytes(raw))
    with pytest.raises(ValueError):
        formats.read_signal(path)


def test_vts1_rejects_truncation(tmp_path):
    path = tmp_path / "sig.vts1"
    formats.write_signal(path, np.zeros((1, 100)), fs=500.0)
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(ValueError):
        formats.read_signal(path)


def test_rtk_csv_round_trip(tmp_path):
    from roadfeel.alignment import RtkTrack

    track = RtkTrack(
        t=np.array([0.0, 0.05, 0.1]),
        s=np.array([0.0, 0.51234567890123, 1.1]),
        v=np.array([10.0, 10.2, 10.4]),
    )
    path = tmp_path / "rtk.csv"
    formats.write_rtk_csv(path, track)
    back = formats.read_rtk_csv(path)
    np.testing.assert_array_equal(back.t, track.t)
    np.testing.assert_array_equal(back.s, track.s)  # repr floats: exact
    np.testing.assert_array_equal(back.v, track.v)
    assert path.read_text().splitlines()[0] == "t,s,v"


def test_image_round_trip(tmp_path):
    img = np.linspace(0, 1, 64 * 64 * 3, dtype=np.float32).reshape(64, 64, 3)
    path = tmp_path / "img.png"
    formats.write_image(path, img)
    back = formats.read_image(path)
    assert back.shape == (64, 64, 3)
    assert np.max(np.abs(back - img)) <= 0.5 / 255 + 1e-7  # 8-bit quantization


# ---------------------------------------------------------------------------
# corpus build / manifest


@pytest.fixture(scope="module")
def small_corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    manifest = build_corpus(out, counts=40, seed=0)
    return out, manifest


def test_default_counts_arithmetic(small_corpus):
    _, manifest = small_corpus
    assert len(manifest.records) == 480
    by_split = {s: len(manifest.split_records(s)) for s in ("train", "val", "test")}
    assert by_split == {"train": 384, "val": 48, "test": 48}


def test_split_stratified_per_cell(small_corpus):
    _, manifest = small_corpus
    for cls in CLASS_ORDER:
        for light in ("day", "night"):
            cell = [
                r for r in manifest.records if r.road_class == cls.value and r.light == light
            ]
            counts = {s: sum(1 for r in cell if r.split == s) for s in ("train", "val", "test")}
            assert counts == {"train": 32, "val": 4, "test": 4}


def test_field_scale_counts_sum():
    counts = resolve_counts("field-day")
    assert sum(counts.values()) == 4732


def test_split_sizes_small_sets():
    assert split_sizes(40) == (32, 4, 4)
    assert split_sizes(3) == (1, 1, 1)
    assert split_sizes(10) == (8, 1, 1)


def test_rebuild_same_seed_identical_manifest(tmp_path, small_corpus):
    _, manifest = small_corpus
    rebuilt = build_corpus(tmp_path / "again", counts=40, seed=0)
    a, b = manifest.to_dict(), rebuilt.to_dict()
    assert a == b  # relative paths, normalization, splits all reproduced


def test_manifest_save_load_round_trip(small_corpus):
    out, manifest = small_corpus
    loaded = DatasetManifest.load(out / "manifest.json")
    assert loaded.to_dict() == manifest.to_dict()
    loaded.validate_files()


def test_manifest_rejects_unknown_schema(tmp_path, small_corpus):
    out, _ = small_corpus
    text = (out / "manifest.json").read_text().replace('"schema_version": 1', '"schema_version": 99')
    bad = tmp_path / "manifest.json"
    bad.write_text(text)
    with pytest.raises(ManifestIntegrityError):
        DatasetManifest.load(bad)


def test_unknown_counts_preset_rejected():
    with pytest.raises(KeyError):
        resolve_counts("no-such-preset")


# ---------------------------------------------------------------------------
# load_pairs


def test_load_pairs_normalization_contract(small_corpus):
    _, manifest = small_corpus
    pairs = load_pairs(manifest, "val")
    assert len(pairs) == 48
    for p in pairs:
        assert np.max(np.abs(p.signal.values)) <= 1.0
        assert p.signal.values.shape == (1, 1024)
        assert p.road_class in {c.value for c in CLASS_ORDER}


def test_load_pairs_inverts_to_stored_units(small_corpus):
    out, manifest = small_corpus
    scale = manifest.normalization["scale"]
    pairs = load_pairs(manifest, "test")
    by_id = {r.pair_id: r for r in manifest.records}
    checked = 0
    for p in pairs:
        raw, _ = formats.read_signal(manifest.resolve(by_id[p.pair_id].signal_path))
        if np.max(np.abs(raw)) <= scale:  # unclipped pairs invert exactly
            np.testing.assert_allclose(p.signal.values * scale, raw, atol=1e-6)
            checked += 1
    assert checked > 0


def test_load_pairs_missing_file_names_pair(tmp_path):
    manifest = build_corpus(tmp_path, counts=3, seed=1)
    victim = manifest.split_records("train")[0]
    manifest.resolve(victim.signal_path).unlink()
    with pytest.raises(ManifestIntegrityError, match=victim.pair_id):
        load_pairs(manifest, "train")


# ---------------------------------------------------------------------------
# sessions


def test_synthesize_session_round_trip(tmp_path):
    synthesize_session(tmp_path, seed=0, speed=10.0, video_duration_s=4.0)
    session = formats.read_session(tmp_path)
    assert len(session.frames) == 120  # 4 s at 30 fps
    assert session.stream.fs == 500.0
    assert session.track.t.size >= 2
    # sensors run long enough to cover the last frame's 20 m look-ahead
    last = session.frames[-1].t
    assert session.stream.t_end >= last + 2.0  # 20 m at 10 m/s


def test_read_session_names_missing_piece(tmp_path):
    synthesize_session(tmp_path, seed=0, video_duration_s=1.0)
    (tmp_path / "rtk.csv").unlink()
    with pytest.raises(FileNotFoundError, match="rtk.csv"):
        formats.read_session(tmp_path)
