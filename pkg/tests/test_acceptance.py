"""Acceptance suite: one PASS/FAIL line per criterion.

Criteria that need CIFAR-10 read the ``cifar-10-batches-bin`` directory
named by ``DTSCATTER_CIFAR10_DIR``.  Without it they fail (the criterion is
not demonstrated) and, where possible, the line carries the same
measurement on the bundled natural-image samples for information.
"""
import io
import json
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import CIFAR_ENV, cifar_dir, gradient_check_error, write_cifar_batch
from dtscatter import cli
from dtscatter.dataio import balanced_indices, load_cifar10_split
from dtscatter.diagnostics import (log_symmetry, oracle_errors, orientation_fractions,
                                   reconstruction_errors, sample_crops, translation_changes)
from dtscatter.linear_probe import ProbeHyperparams, evaluate_probe, train_probe
from dtscatter.scatternet import ScatterConfig, extract_batch, feature_manifest

pytestmark = pytest.mark.acceptance

BASELINES = Path(__file__).parent / "baselines"
NO_CIFAR = f"CIFAR-10 not available (set {CIFAR_ENV} to a cifar-10-batches-bin directory)"


@pytest.fixture
def verdict(capsys):
    def emit(name, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {'PASS' if ok else 'FAIL'} | {name} | {detail}")
        assert ok, detail
    return emit


def _elapsed(start):
    return time.perf_counter() - start


def test_perfect_reconstruction(verdict):
    t = time.perf_counter()
    err = reconstruction_errors(count=100, size=64, levels=(1, 2, 3), seed=2024)
    dt = _elapsed(t)
    ok = bool(np.all(err <= 1e-10)) and dt < 10
    verdict("DTCWT perfect reconstruction", ok,
            f"max rel error {err.max():.2e} over 100 planes x levels 1-3 (<= 1e-10), {dt:.2f}s (< 10s)")


def test_oracle_equivalence(verdict):
    t = time.perf_counter()
    err = oracle_errors(count=20, sizes=(8, 16, 24, 32), seed=2024)
    dt = _elapsed(t)
    ok = bool(np.all(err <= 1e-8)) and dt < 60
    verdict("Oracle equivalence", ok,
            f"max rel error {err.max():.2e} over 20 planes <= 32x32, all levels/orientations "
            f"(<= 1e-8), {dt:.2f}s (< 60s)")


def test_channel_count_identity(verdict):
    manifest = feature_manifest(ScatterConfig())
    per = {}
    for p in manifest:
        per.setdefault(p.resolution_factor, []).append(p.m)
    order_ok = all(ms == [0] * 3 + [1] * 12 + [2] * 36 for ms in per.values())
    # first-layer paths scale-major, second-layer (r1, r2) lexicographic
    m2 = [(p.r1, p.r2) for p in manifest[15:51]]
    order_ok &= m2 == sorted(m2) and list(per) == [1.5, 2.0]
    features, _ = extract_batch(np.random.default_rng(0).random((2, 3, 40, 24)))
    ok = len(manifest) == 102 and order_ok and features.shape[1] == 102
    verdict("Channel-count identity", ok,
            f"{len(manifest)} channels = " + " + ".join(
                f"{len(v)} ({v.count(0)}+{v.count(1)}+{v.count(2)}) @ {f}x" for f, v in per.items())
            + f"; fixed order {order_ok}; non-CIFAR input gives {features.shape[1]}")


def test_orientation_selectivity(verdict):
    t = time.perf_counter()
    fr = orientation_fractions(levels=(1, 2, 3))
    dt = _elapsed(t)
    worst = min(fr, key=fr.get)
    ok = min(fr.values()) >= 0.8 and dt < 10
    verdict("Orientation selectivity", ok,
            f"min matching-subband energy share {fr[worst]:.3f} (level {worst[0]}, "
            f"{worst[1]} deg) over 6 orientations x levels 1-3 (>= 0.80), {dt:.2f}s (< 10s)")


def _cifar_test_images(count):
    d = cifar_dir()
    if d is None:
        return None
    return load_cifar10_split(d, "test")[0][:count]


def _translation_detail(ch):
    return (f"mean rel change complex {ch['complex'].mean():.4f} > modulus "
            f"{ch['modulus'].mean():.4f} > S {ch['scattering'].mean():.4f}; "
            f"per-image ordering holds for "
            f"{np.mean((ch['scattering'] < ch['modulus']) & (ch['modulus'] < ch['complex'])):.0%}")


def test_translation_contraction(verdict):
    images = _cifar_test_images(100)
    if images is None:
        proxy = translation_changes(sample_crops(100, seed=0))
        verdict("Translation contraction", False,
                f"{NO_CIFAR}; bundled-sample proxy: {_translation_detail(proxy)}")
    t = time.perf_counter()
    ch = translation_changes(images)
    dt = _elapsed(t)
    ordered = bool(np.all(ch["scattering"] < ch["modulus"]) and np.all(ch["modulus"] < ch["complex"]))
    measured = {k: float(v.mean()) for k, v in ch.items()}
    path = BASELINES / "translation_cifar10.json"
    if path.exists():
        base = json.loads(path.read_text())
        drift = max(abs(measured[k] - base[k]) / base[k] for k in ("complex", "modulus", "scattering"))
        baseline_ok = drift <= 1e-6
        note = f"baseline drift {drift:.1e}"
    else:
        path.write_text(json.dumps(measured, indent=2, sort_keys=True) + "\n")
        baseline_ok, note = True, f"baseline recorded to {path.name}"
    verdict("Translation contraction", ordered and baseline_ok and dt < 120,
            f"100 CIFAR-10 test images: {_translation_detail(ch)}; {note}; {dt:.1f}s (< 120s)")


def test_log_symmetry(verdict):
    images = _cifar_test_images(100)
    if images is None:
        raw, logged = log_symmetry(sample_crops(100, seed=0))
        verdict("Log-symmetry", False,
                f"{NO_CIFAR}; bundled-sample proxy: |skew| {abs(raw):.3f} -> {abs(logged):.3f}")
    t = time.perf_counter()
    raw, logged = log_symmetry(images)
    dt = _elapsed(t)
    verdict("Log-symmetry", abs(logged) < abs(raw) and dt < 60,
            f"100 CIFAR-10 images, j=1 envelopes: |skew| {abs(raw):.3f} -> {abs(logged):.3f} "
            f"after log(U + 1.1); {dt:.1f}s (< 60s)")


def test_probe_gradient_check(verdict):
    t = time.perf_counter()
    errs = np.array([gradient_check_error(seed) for seed in range(100)])
    dt = _elapsed(t)
    verdict("Probe gradient check", bool(np.all(errs <= 1e-5)) and dt < 30,
            f"max rel error {errs.max():.2e} over 100 random problems (<= 1e-5), {dt:.2f}s (< 30s)")


def test_desk_scale_feature_quality(verdict):
    d = cifar_dir()
    if d is None:
        verdict("Desk-scale feature quality", False, NO_CIFAR)
    t = time.perf_counter()
    train_x, train_y = load_cifar10_split(d, "train")
    test_x, test_y = load_cifar10_split(d, "test")
    test_s, _ = extract_batch(test_x, threads=4)
    wins, rows = 0, []
    for seed in range(5):
        idx = balanced_indices(train_y, 300, seed)
        hyper = ProbeHyperparams(seed=seed)
        s_err = evaluate_probe(train_probe(extract_batch(train_x[idx])[0], train_y[idx], hyper,
                                           classes=10), test_s, test_y).error
        p_err = evaluate_probe(train_probe(train_x[idx], train_y[idx], hyper, classes=10),
                               test_x, test_y).error
        wins += s_err < p_err
        rows.append(f"seed {seed}: scatter {s_err:.4f} vs pixels {p_err:.4f}")
    dt = _elapsed(t)
    verdict("Desk-scale feature quality", wins >= 4 and dt <= 1800,
            f"scattering wins {wins}/5 ({'; '.join(rows)}); {dt:.0f}s (<= 1800s)")


def test_extract_determinism(verdict, tmp_path):
    d = cifar_dir()
    if d is not None:
        source, subset = d / "test_batch.bin", 300
    else:
        source = write_cifar_batch(tmp_path / "batch.bin", sample_crops(300, seed=8),
                                   np.arange(300) % 10)
        subset = 100
    blobs = []
    for i, threads in enumerate((1, 1, 4, 3)):
        out = tmp_path / f"f{i}.bin"
        code = cli.main(["extract", str(source), "--subset", str(subset), "--seed", "7",
                         "--threads", str(threads), "--out", str(out)], stdout=io.StringIO())
        assert code == 0
        blobs.append(out.read_bytes())
    ok = all(b == blobs[0] for b in blobs)
    verdict("Determinism", ok,
            f"4 extract runs (threads 1,1,4,3), subset {subset}, seed 7 on "
            f"{'CIFAR-10 test batch' if d else 'a CIFAR-format batch of bundled samples'}: "
            f"byte-identical={ok}, {len(blobs[0])} bytes")
