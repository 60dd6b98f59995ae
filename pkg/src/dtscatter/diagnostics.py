"""Measurements behind the property checks: reconstruction, oracle
agreement, orientation tuning, translation contraction and envelope
skewness."""
from functools import lru_cache
from importlib import resources

import numpy as np

from .dataio import load_ppm
from .dtcwt.oracle import oracle_direct_subband
from .dtcwt.transform import ORIENTATIONS, dtcwt_forward, dtcwt_inverse
from .scatternet import (ScatterConfig, extract_batch, feature_manifest,
                         layer1_envelopes, resample_image)

SAMPLE_NAMES = ("astronaut", "coffee", "chelsea", "rocket")


def relative_error(a, b):
    a, b = np.asarray(a), np.asarray(b)
    scale = np.linalg.norm(b)
    return float(np.linalg.norm(a - b) / scale) if scale else float(np.linalg.norm(a - b))


@lru_cache(maxsize=None)
def sample_image(name):
    """A bundled 128x128 natural RGB image, ``(3, 128, 128)`` in [0, 1]."""
    path = resources.files("dtscatter").joinpath("data").joinpath(f"sample_{name}.ppm")
    with resources.as_file(path) as p:
        img = load_ppm(p)
    img.setflags(write=False)
    return img


def sample_crops(count, side=32, seed=0, scale=2):
    """Random ``side``-pixel crops of the bundled images, box-downscaled by
    ``scale`` first so objects sit at roughly thumbnail size."""
    rng = np.random.default_rng(seed)
    bases = []
    for name in SAMPLE_NAMES:
        img = sample_image(name)
        h, w = img.shape[1] // scale, img.shape[2] // scale
        bases.append(img[:, :h * scale, :w * scale].reshape(3, h, scale, w, scale).mean(axis=(2, 4)))
    out = np.empty((count, 3, side, side))
    for i in range(count):
        base = bases[rng.integers(len(bases))]
        top = rng.integers(base.shape[1] - side + 1)
        left = rng.integers(base.shape[2] - side + 1)
        out[i] = base[:, top:top + side, left:left + side]
    return out


# --- perfect reconstruction and oracle -------------------------------------

def reconstruction_errors(count=100, size=64, levels=(1, 2, 3), seed=0):
    """Relative round-trip error of random planes, shape ``(count, len(levels))``."""
    rng = np.random.default_rng(seed)
    planes = rng.standard_normal((count, size, size))
    errs = np.empty((count, len(levels)))
    for c, lev in enumerate(levels):
        back = dtcwt_inverse(dtcwt_forward(planes, lev))
        errs[:, c] = np.linalg.norm(back - planes, axis=(1, 2)) / np.linalg.norm(planes, axis=(1, 2))
    return errs


def oracle_errors(count=20, sizes=(16, 24, 32), seed=0):
    """Worst relative error between fast and brute-force subbands, per plane."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        n = sizes[i % len(sizes)]
        plane = rng.standard_normal((n, n))
        max_level = int(np.log2(n & -n))
        max_level = min(max_level, 3)
        pyr = dtcwt_forward(plane, max_level)
        worst = 0.0
        for lev in range(1, max_level + 1):
            for k, r in enumerate(ORIENTATIONS):
                ref = oracle_direct_subband(plane, lev, r).values
                worst = max(worst, relative_error(pyr.highpasses[lev - 1][k], ref))
        out.append(worst)
    return np.array(out)


# --- orientation ------------------------------------------------------------

def oriented_sinusoid(size, orientation, radius):
    """cos grating whose crests run at ``orientation`` degrees (counter-
    clockwise from the +column axis, rows pointing down)."""
    r, c = np.mgrid[0:size, 0:size]
    phi = np.deg2rad(orientation + 90)
    return np.cos(radius * (c * np.cos(phi) - r * np.sin(phi)))


def band_energies(plane, level, margin=8):
    """Per-orientation energy of ``level`` away from the borders; accepts a
    stack of planes (the result then has shape ``(..., 6)``)."""
    band = dtcwt_forward(plane, level).highpasses[level - 1]
    crop = max(1, margin >> (level - 1))
    core = band[..., crop:-crop, crop:-crop]
    return np.sum(core.real ** 2 + core.imag ** 2, axis=(-2, -1))


@lru_cache(maxsize=None)
def tuned_grating(level, orientation, size=64):
    """(angle, radius) of the grating the matching subband responds to most.

    The search spans +-15 degrees around the nominal label because the
    separable subbands do not peak exactly at their nominal angles.
    """
    k = ORIENTATIONS.index(orientation)
    centre = 0.75 * np.pi / 2 ** (level - 1)
    angle_step, radius_step = 5.0, 0.05 * centre
    angles = orientation + np.arange(-15, 15.5, angle_step)
    radii = centre * np.arange(0.5, 1.36, 0.05)
    best = None
    for _ in range(2):  # coarse grid, then a finer one around the winner
        cand = [(a, w) for a in angles for w in radii if 0 < w < np.pi]
        stack = np.stack([oriented_sinusoid(size, a, w) for a, w in cand])
        best = cand[int(np.argmax(band_energies(stack, level)[:, k]))]
        angles = best[0] + np.arange(-angle_step, angle_step + 0.5, 1.0)
        radii = best[1] + radius_step * np.linspace(-1, 1, 9)
    return float(best[0]), float(best[1])


def orientation_fractions(levels=(1, 2, 3), size=64):
    """{(level, orientation): share of the level's bandpass energy that lands
    in the matching subband for a tuned grating}."""
    out = {}
    for lev in levels:
        for k, r in enumerate(ORIENTATIONS):
            e = band_energies(oriented_sinusoid(size, *tuned_grating(lev, r, size)), lev)
            out[(lev, r)] = float(e[k] / e.sum())
    return out


# --- translation contraction -------------------------------------------------

def translation_changes(images, config=None, shift=1, axis=-1, threads=1):
    """Relative L2 change under a cyclic ``shift`` for complex coefficients,
    their moduli and the scattering features; each an ``(N,)`` array."""
    config = config or ScatterConfig()
    x = np.asarray(images, dtype=np.float64)
    xs = np.roll(x, shift, axis=axis)

    def stacked(img):
        return np.concatenate(
            [b.reshape(b.shape[0], -1) for b in dtcwt_forward(img, config.levels,
                                                              config.wavelet_filters()).highpasses],
            axis=1)

    z0, z1 = stacked(x), stacked(xs)

    def rel(a, b):
        a = a.reshape(a.shape[0], -1)
        b = b.reshape(b.shape[0], -1)
        return np.linalg.norm(a - b, axis=1) / np.linalg.norm(a, axis=1)

    s0 = extract_batch(x, config, threads=threads)[0]
    s1 = extract_batch(xs, config, threads=threads)[0]
    return {
        "pixels": rel(x, xs),
        "complex": rel(z0, z1),
        "modulus": rel(np.abs(z0), np.abs(z1)),
        "scattering": rel(s0, s1),
    }


# --- log symmetry ------------------------------------------------------------

def skewness(values):
    v = np.asarray(values, dtype=np.float64).ravel()
    d = v - v.mean()
    m2 = np.mean(d * d)
    return float(np.mean(d ** 3) / m2 ** 1.5) if m2 > 0 else 0.0


def log_symmetry(images, config=None, scale=1):
    """Skewness of the pooled scale-``scale`` envelopes before and after the
    parametric log, over every configured resolution."""
    config = config or ScatterConfig()
    k = config.k_for(scale)
    raw = []
    for f in config.resolution_factors:
        x = resample_image(np.asarray(images, dtype=np.float64), f, config.levels)
        raw += [e.plane.ravel() for e in layer1_envelopes(x, config, f) if e.path.j1 == scale]
    raw = np.concatenate(raw)
    logged = np.log(raw + k) if k is not None else raw
    return skewness(raw), skewness(logged)


# --- channel counts ----------------------------------------------------------

def channel_counts(config=None):
    config = config or ScatterConfig()
    manifest = feature_manifest(config)
    per_factor = {}
    for p in manifest:
        per_factor.setdefault(p.resolution_factor, {0: 0, 1: 0, 2: 0})[p.m] += 1
    return len(manifest), per_factor
