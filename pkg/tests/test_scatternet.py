import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from dtscatter.diagnostics import (SAMPLE_NAMES, sample_crops, sample_image,
                                   translation_changes)
from dtscatter.dtcwt.transform import ORIENTATIONS, complex_magnitude, dtcwt_forward
from dtscatter.errors import ParameterError, ShapeError
from dtscatter.scatternet import (ScatterConfig, ScatterPath, SubbandEnvelope, extract_batch,
                                  extract_features, feature_manifest, layer0, layer1_envelopes,
                                  layer2_envelopes, load_config, parametric_log, parse_config,
                                  resample_image, scatter_one_resolution, smooth_decimate,
                                  smoothing_kernel)

BASELINES = Path(__file__).parent / "baselines"
CFG = ScatterConfig()


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def env(plane, j=1, r=15):
    return SubbandEnvelope(ScatterPath(1, 1.0, j1=j, r1=r), np.asarray(plane, float), j)


# --- configuration --------------------------------------------------------------

def test_defaults():
    assert CFG.levels == 2
    assert CFG.k_for(1) == 1.1 and CFG.k_for(2) is None
    assert CFG.resolution_factors == (1.5, 2.0)
    assert CFG.orientations == ORIENTATIONS


@pytest.mark.parametrize("kwargs", [
    {"levels": 1}, {"log_k": {1: 0.0}}, {"log_k": {1: -2}}, {"log_k": {3: 1.0}},
    {"resolution_factors": (0.5,)}, {"resolution_factors": (float("inf"),)},
    {"resolution_factors": ()}, {"alignment": "nearest"}, {"pixel_normalization": "percent"},
    {"orientations": (0, 45)},
])
def test_invalid_configs(kwargs):
    with pytest.raises(ParameterError):
        ScatterConfig(**kwargs)


def test_config_text_round_trip(tmp_path):
    cfg = ScatterConfig(levels=3, log_k={1: 1.1, 2: 0.5}, resolution_factors=(1.0, 2.0),
                        alignment="bilinear")
    path = tmp_path / "c.cfg"
    path.write_text(cfg.to_text())
    again = load_config(path)
    assert again == cfg
    assert again.config_hash() == cfg.config_hash() != CFG.config_hash()


def test_config_parse_comments_and_errors():
    cfg = parse_config("# hi\nlevels = 2  # J\nlog_k.1 = 1.1\n\n")
    assert cfg == CFG
    for bad in ("levels 2", "levels = two", "colour = red", "log_k.x = 1"):
        with pytest.raises(ParameterError):
            parse_config(bad)


def test_path_validation():
    with pytest.raises(ParameterError):
        ScatterPath(2, 1.5, j1=2, r1=15, j2=2, r2=45)
    with pytest.raises(ParameterError):
        ScatterPath(0, 1.5)
    p = ScatterPath(2, 1.5, j1=1, r1=15, j2=2, r2=45)
    assert ScatterPath.from_dict(json.loads(json.dumps(p.to_dict()))) == p


# --- resampling -----------------------------------------------------------------

@pytest.mark.parametrize("factor, size", [(1.5, 48), (2.0, 64), (1.0, 32)])
def test_resample_sizes(rng, factor, size):
    assert resample_image(rng.random((3, 32, 32)), factor).shape == (3, size, size)


def test_resample_identity(rng):
    x = rng.random((3, 32, 24))
    assert np.array_equal(resample_image(x, 1.0), x)


def test_resample_snaps_to_multiple():
    # 30 * 1.5 = 45 -> 44, 10 * 1.3 = 13 -> 12
    assert resample_image(np.zeros((3, 30, 10)), 1.5).shape[1] == 44
    assert resample_image(np.zeros((3, 10, 10)), 1.3).shape[1:] == (12, 12)


def test_resample_rejects_shrinking():
    with pytest.raises(ParameterError):
        resample_image(np.zeros((3, 8, 8)), 0.9)


def test_resample_preserves_constants_and_range(rng):
    np.testing.assert_allclose(resample_image(np.full((3, 32, 32), 0.7), 1.5), 0.7, atol=1e-15)
    x = rng.random((3, 32, 32))
    y = resample_image(x, 1.5)
    assert y.min() >= x.min() - 1e-15 and y.max() <= x.max() + 1e-15


def test_resample_doubling_is_bilinear_with_half_pixel_centres():
    x = np.arange(4.0)[None, None, :].repeat(4, axis=1)
    y = resample_image(x, 2.0)
    np.testing.assert_allclose(y[0, 0], [0, 0.25, 0.75, 1.25, 1.75, 2.25, 2.75, 3])


# --- smoothing ------------------------------------------------------------------

def _gaussian_oracle(plane, levels, level):
    g = smoothing_kernel(levels, level)
    r = len(g) // 2
    step = 2 ** (levels - level)
    h, w = plane.shape

    def idx(i, n):
        i = i % (2 * n)
        return i if i < n else 2 * n - 1 - i

    out = np.zeros((h // step, w // step))
    for a in range(out.shape[0]):
        for b in range(out.shape[1]):
            acc = 0.0
            for u in range(-r, r + 1):
                for v in range(-r, r + 1):
                    acc += g[u + r] * g[v + r] * plane[idx(step * a + u, h), idx(step * b + v, w)]
            out[a, b] = acc
    return out


def test_kernel_properties():
    for level in (0, 1, 2):
        g = smoothing_kernel(2, level)
        assert abs(g.sum() - 1) <= 1e-15
        np.testing.assert_array_equal(g, g[::-1])
    assert len(smoothing_kernel(2, 0)) == 2 * 8 + 1  # sigma 2, cut at 4 sigma


def test_smooth_decimate_matches_direct_convolution(rng):
    x = rng.random((16, 24))
    assert np.abs(smooth_decimate(x, CFG) - _gaussian_oracle(x, 2, 0)).max() <= 1e-12
    y = rng.random((8, 12))
    assert np.abs(smooth_decimate(y, CFG, level=1) - _gaussian_oracle(y, 2, 1)).max() <= 1e-12


def test_smooth_decimate_constant():
    np.testing.assert_allclose(smooth_decimate(np.full((32, 32), 3.5), CFG), 3.5, atol=1e-13)


def test_smooth_decimate_impulse_gives_kernel():
    x = np.zeros((64, 64))
    x[32, 32] = 1.0
    g = smoothing_kernel(2, 0)
    out = smooth_decimate(x, CFG)
    # output sample (8, 8 + t) sits 4t pixels from the impulse
    expect = np.outer(g[8::4], g[8::4])[:3, :3]
    np.testing.assert_allclose(out[8:11, 8:11], expect, atol=1e-16)


@settings(max_examples=30, deadline=None)
@given(hnp.arrays(np.float64, (8, 12), elements=st.floats(0, 1e3)))
def test_smooth_decimate_preserves_non_negativity(x):
    assert np.all(smooth_decimate(x, CFG) >= 0)


def test_smooth_decimate_shape_error():
    with pytest.raises(ShapeError):
        smooth_decimate(np.zeros((10, 12)), CFG)
    with pytest.raises(ParameterError):
        smooth_decimate(np.zeros((8, 8)), CFG, level=3)


def test_smooth_decimate_translation_on_dataset(needs_cifar):
    from dtscatter.dataio import load_cifar10_split
    images = load_cifar10_split(needs_cifar, "test")[0][:100]
    planes = images.reshape(-1, 32, 32)
    ratios = []
    for p in planes[:100]:
        q = np.roll(p, 1, axis=1)
        ratios.append(rel(smooth_decimate(q, CFG), smooth_decimate(p, CFG)) / rel(q, p))
    assert np.mean(ratios) <= 0.25


# --- layer 0 --------------------------------------------------------------------

def test_layer0_constant_image():
    out = layer0(np.stack([np.full((32, 32), c) for c in (0.1, 0.5, 0.9)]), CFG)
    assert [e.path.colour for e in out] == ["R", "G", "B"]
    for e, c in zip(out, (0.1, 0.5, 0.9)):
        assert e.plane.shape == (8, 8)
        np.testing.assert_allclose(e.plane, c, atol=1e-14)


def test_layer0_matches_oracle(rng):
    x = rng.random((3, 16, 16))
    for i, e in enumerate(layer0(x, CFG)):
        assert np.abs(e.plane - _gaussian_oracle(x[i], 2, 0)).max() <= 1e-12


def test_layer0_shape_errors():
    with pytest.raises(ShapeError):
        layer0(np.zeros((3, 30, 32)), CFG)
    with pytest.raises(ShapeError):
        layer0(np.zeros((4, 32, 32)), CFG)


# --- layer 1 and the log ----------------------------------------------------------

def test_layer1_counts_and_order(rng):
    out = layer1_envelopes(rng.random((3, 32, 32)), CFG)
    assert len(out) == 12
    assert [(e.path.j1, e.path.r1) for e in out] == [(j, r) for j in (1, 2) for r in ORIENTATIONS]
    assert out[0].plane.shape == (16, 16) and out[6].plane.shape == (8, 8)
    assert all(np.all(e.plane >= 0) for e in out)


def test_layer1_grey_image_is_sqrt3_times_channel(rng):
    grey = rng.random((32, 32))
    out = layer1_envelopes(np.stack([grey] * 3), CFG)
    single = dtcwt_forward(grey, 2)
    for e in out:
        k = ORIENTATIONS.index(e.path.r1)
        expect = np.sqrt(3) * complex_magnitude(single.highpasses[e.path.j1 - 1][k])
        np.testing.assert_allclose(e.plane, expect, rtol=1e-13)


def test_layer1_zero_image():
    assert all(np.all(e.plane == 0) for e in layer1_envelopes(np.zeros((3, 16, 16)), CFG))


def test_log_values():
    one = ScatterConfig(log_k={1: 1.0})
    assert np.all(parametric_log(env(np.zeros((2, 2))), one).plane == 0)
    np.testing.assert_allclose(parametric_log(env(np.zeros((2, 2))), CFG).plane, np.log(1.1))
    assert abs(np.log(1.1) - 0.0953) < 1e-4


def test_log_identity_at_unconfigured_scale(rng):
    e = env(rng.random((4, 4)), j=2)
    assert parametric_log(e, CFG) is e


def test_log_rejects_negative_envelope():
    with pytest.raises(ParameterError):
        parametric_log(env(-np.ones((2, 2))), CFG)


@given(hnp.arrays(np.float64, 16, elements=st.floats(0, 1e6)),
       hnp.arrays(np.float64, 16, elements=st.floats(0, 1e6)))
def test_log_is_monotone(a, b):
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    assert np.all(parametric_log(env(lo), CFG).plane <= parametric_log(env(hi), CFG).plane)


# --- layer 2 ----------------------------------------------------------------------

def _post_log(x):
    return [parametric_log(e, CFG) for e in layer1_envelopes(x, CFG) if e.path.j1 == 1]


def test_layer2_counts_and_paths(rng):
    out = layer2_envelopes(_post_log(rng.random((3, 32, 32))), CFG)
    assert len(out) == 36
    assert [(e.path.r1, e.path.r2) for e in out] == [(a, b) for a in ORIENTATIONS
                                                     for b in ORIENTATIONS]
    assert all(e.path.j1 == 1 and e.path.j2 == 2 and e.plane.shape == (8, 8) for e in out)
    assert all(np.all(e.plane >= 0) for e in out)


def test_layer2_zero_and_constant_inputs():
    zeros = [env(np.zeros((16, 16)), r=r) for r in ORIENTATIONS]
    assert all(np.all(e.plane == 0) for e in layer2_envelopes(zeros, CFG))
    consts = [env(np.full((16, 16), np.log(1.1)), r=r) for r in ORIENTATIONS]
    assert max(np.abs(e.plane).max() for e in layer2_envelopes(consts, CFG)) <= 1e-10


def test_deeper_config_cascades_all_coarser_scales(rng):
    cfg = ScatterConfig(levels=3)
    t = scatter_one_resolution(rng.random((3, 32, 32)), cfg)
    m2 = [p for p in t.manifest if p.m == 2]
    # j1=1 -> j2 in {2, 3}, j1=2 -> j2=3
    assert len(m2) == 36 * 3
    assert t.data.shape == (3 + 18 + 108, 4, 4)


# --- assembly -----------------------------------------------------------------------

@pytest.mark.parametrize("size, grid", [(48, 12), (64, 16)])
def test_one_resolution_shape(rng, size, grid):
    t = scatter_one_resolution(rng.random((3, size, size)), CFG)
    assert t.data.shape == (51, grid, grid)
    assert [p.m for p in t.manifest] == [0] * 3 + [1] * 12 + [2] * 36


def test_one_resolution_constant_image():
    t = scatter_one_resolution(np.full((3, 48, 48), 0.4), CFG)
    np.testing.assert_allclose(t.data[:3], 0.4, atol=1e-14)
    for p, plane in zip(t.manifest[3:], t.data[3:]):
        if p.m == 1 and p.j1 == 1:
            np.testing.assert_allclose(plane, np.log(1.1), atol=1e-13)
        else:
            assert np.abs(plane).max() <= 1e-10


def test_extract_features_cifar_shape(rng):
    t = extract_features(rng.random((3, 32, 32)))
    assert (t.channels, t.height, t.width) == (102, 12, 12)
    assert [p.resolution_factor for p in t.manifest] == [1.5] * 51 + [2.0] * 51
    assert t.manifest == feature_manifest(CFG)


def test_manifest_order_is_fixed():
    labels = [p.label() for p in feature_manifest(CFG)]
    assert labels[:4] == ["m0:R@1.5", "m0:G@1.5", "m0:B@1.5", "m1:j1=1,r1=15@1.5"]
    assert labels[14] == "m1:j1=2,r1=165@1.5"
    assert labels[15] == "m2:j1=1,r1=15,j2=2,r2=15@1.5"
    assert labels[16] == "m2:j1=1,r1=15,j2=2,r2=45@1.5"
    assert labels[51] == "m0:R@2.0"
    assert len(set(labels)) == 102


def test_value_floors(rng):
    t = extract_features(rng.random((3, 32, 32)))
    for p, plane in zip(t.manifest, t.data):
        floor = np.log(1.1) if p.m == 1 and p.j1 == 1 else 0.0
        assert plane.min() >= floor - 1e-12, p.label()


def test_colour_permutation(rng):
    x = rng.random((3, 32, 32))
    a = extract_features(x)
    b = extract_features(x[[2, 0, 1]])
    for i, p in enumerate(a.manifest):
        if p.m == 0:
            src = i - "RGB".index(p.colour) + [1, 2, 0]["RGB".index(p.colour)]
            np.testing.assert_allclose(a.data[i], b.data[src], atol=1e-15)
        else:
            np.testing.assert_allclose(a.data[i], b.data[i], rtol=1e-12, atol=1e-15)


def test_area_alignment_preserves_mean(rng):
    x = rng.random((3, 32, 32))
    t = extract_features(x)
    native = scatter_one_resolution(resample_image(x, 2.0), CFG, 2.0).data
    np.testing.assert_allclose(t.data[51:].mean(axis=(1, 2)), native.mean(axis=(1, 2)), rtol=1e-12)


def test_bilinear_alignment_option(rng):
    t = extract_features(rng.random((3, 32, 32)), ScatterConfig(alignment="bilinear"))
    assert t.data.shape == (102, 12, 12)


def test_byte_normalisation(rng):
    x = rng.integers(0, 256, (3, 32, 32)).astype(float)
    a = extract_features(x, ScatterConfig(pixel_normalization="byte")).data
    np.testing.assert_allclose(a, extract_features(x / 255.0).data, rtol=1e-14, atol=1e-15)


def test_extract_features_rejects_stacks():
    with pytest.raises(ShapeError):
        extract_features(np.zeros((2, 3, 32, 32)))


def test_batch_statistics():
    imgs = sample_crops(100, seed=11)
    feats, _ = extract_batch(imgs)
    assert np.mean(feats.var(axis=(0, 2, 3)) > 0) >= 0.95
    assert not np.array_equal(feats[0], feats[1])


def test_batch_is_deterministic_across_threads_and_chunks(rng):
    imgs = rng.random((10, 3, 32, 32))
    a, _ = extract_batch(imgs, threads=1, chunk_size=64)
    b, _ = extract_batch(imgs, threads=4, chunk_size=3)
    c, _ = extract_batch(imgs, threads=2, chunk_size=1)
    assert np.array_equal(a, b) and np.array_equal(a, c)
    assert np.array_equal(a[4], extract_features(imgs[4]).data)


# --- invariance -------------------------------------------------------------------------

def _thumbnail_pair(img, factor=4, side=28):
    # a 1-pixel translation at thumbnail scale, without wrap-around
    n = img.shape[1] // factor - 1
    cut = n * factor
    a = img[:, :cut, :cut].reshape(3, n, factor, n, factor).mean(axis=(2, 4))
    b = img[:, :cut, factor:cut + factor].reshape(3, n, factor, n, factor).mean(axis=(2, 4))
    return a[:, :side, :side], b[:, :side, :side]


def test_translated_image_changes_less_than_pixels():
    for name in SAMPLE_NAMES:
        a, b = _thumbnail_pair(sample_image(name))
        assert rel(extract_features(b).data, extract_features(a).data) < rel(b, a), name


def test_translated_crops_change_less_than_pixels_in_aggregate():
    # not every crop: on flat crops the column entering at the border dominates
    big = sample_crops(200, side=34, seed=2)
    x0, x1 = big[:, :, 1:33, 1:33], big[:, :, 1:33, :32]
    s0, _ = extract_batch(x0)
    s1, _ = extract_batch(x1)
    rs = np.array([rel(b, a) for a, b in zip(s0, s1)])
    rp = np.array([rel(q, p) for p, q in zip(x0, x1)])
    assert rs.mean() < 0.8 * rp.mean()
    assert np.mean(rs < rp) >= 0.95


def test_translation_contraction_ordering_on_samples():
    ch = translation_changes(sample_crops(100, seed=0))
    assert np.all(ch["scattering"] < ch["modulus"])
    assert np.all(ch["modulus"] < ch["complex"])


def test_translation_ratios_regression():
    # measured on the bundled samples; guards against silent pipeline drift
    base = json.loads((BASELINES / "translation_samples.json").read_text())
    ch = translation_changes(sample_crops(100, seed=0))
    for key in ("complex", "modulus", "scattering", "pixels"):
        assert abs(ch[key].mean() - base[key]) <= 1e-9 * max(1.0, base[key]), key
