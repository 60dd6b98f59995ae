"""Two-layer parametric-log DTCWT scattering network.

Images are channel-first float arrays ``(3, H, W)`` (or stacks
``(N, 3, H, W)``) with values in [0, 1].  For one resolution the output is

    [ x * phi                      per colour channel        (3)
      |log(U1 + k_j)| * phi        U1 = L2-fused |x * psi|   (6 J)
      |U1 * psi| * phi             cascaded, j2 > j1         (36 for J = 2) ]

sampled on the ``H / 2**J`` grid, where ``phi`` is a unit-DC Gaussian.  The
default configuration runs this at 1.5x and 2x the input size and brings
both onto the smaller grid, giving 102 channels for an RGB image.
"""
import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from ._backend import filter_rows
from .dtcwt.filters import default_filters, load_filter_set
from .dtcwt.transform import ORIENTATIONS, complex_magnitude, dtcwt_forward
from .errors import ParameterError, ShapeError

COLOURS = ("R", "G", "B")
ALIGNMENTS = ("area", "bilinear")
PIXEL_NORMALIZATIONS = ("unit", "byte")


@dataclass(frozen=True)
class ScatterConfig:
    """Pipeline parameters.  ``log_k`` maps scale j -> k_j; scales without an
    entry pass through the log layer unchanged."""

    levels: int = 2
    log_k: tuple = ((1, 1.1),)
    resolution_factors: tuple = (1.5, 2.0)
    alignment: str = "area"
    pixel_normalization: str = "unit"
    filters: str = "default"
    orientations: tuple = ORIENTATIONS

    def __post_init__(self):
        log_k = self.log_k.items() if isinstance(self.log_k, dict) else self.log_k
        object.__setattr__(self, "log_k", tuple(sorted((int(j), float(k)) for j, k in log_k)))
        object.__setattr__(self, "resolution_factors",
                           tuple(float(f) for f in self.resolution_factors))
        object.__setattr__(self, "orientations", tuple(self.orientations))
        if int(self.levels) != self.levels or self.levels < 2:
            raise ParameterError(f"levels must be an integer >= 2, got {self.levels!r}")
        for j, k in self.log_k:
            if not 1 <= j <= self.levels:
                raise ParameterError(f"log_k scale {j} outside 1..{self.levels}")
            if not (k > 0 and math.isfinite(k)):
                raise ParameterError(f"log_k for scale {j} must be > 0, got {k!r}")
        if not self.resolution_factors:
            raise ParameterError("at least one resolution factor is required")
        for f in self.resolution_factors:
            if not (math.isfinite(f) and f >= 1):
                raise ParameterError(f"resolution factors must be finite and >= 1, got {f!r}")
        if self.alignment not in ALIGNMENTS:
            raise ParameterError(f"alignment must be one of {ALIGNMENTS}")
        if self.pixel_normalization not in PIXEL_NORMALIZATIONS:
            raise ParameterError(f"pixel_normalization must be one of {PIXEL_NORMALIZATIONS}")
        if self.orientations != ORIENTATIONS:
            raise ParameterError(f"orientations are fixed to {ORIENTATIONS}")

    def k_for(self, scale):
        return dict(self.log_k).get(scale)

    def wavelet_filters(self):
        return _filters_for(self.filters)

    def to_text(self):
        lines = [
            "# dtscatter scattering configuration",
            f"levels = {self.levels}",
        ]
        lines += [f"log_k.{j} = {k!r}" for j, k in self.log_k]
        lines += [
            "resolution_factors = " + ", ".join(repr(f) for f in self.resolution_factors),
            f"alignment = {self.alignment}",
            f"pixel_normalization = {self.pixel_normalization}",
            f"filters = {self.filters}",
        ]
        return "\n".join(lines) + "\n"

    def config_hash(self):
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()[:16]


@lru_cache(maxsize=8)
def _filters_for(source):
    return default_filters() if source == "default" else load_filter_set(source)


def parse_config(text):
    """Parse ``key = value`` lines ('#' comments) into a ScatterConfig."""
    kwargs = {}
    log_k = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"config line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            if key == "levels":
                kwargs["levels"] = int(value)
            elif key.startswith("log_k."):
                log_k[int(key[len("log_k."):])] = float(value)
            elif key == "resolution_factors":
                kwargs["resolution_factors"] = tuple(float(v) for v in value.split(",") if v.strip())
            elif key in ("alignment", "pixel_normalization", "filters"):
                kwargs[key] = value
            else:
                raise ParameterError(f"config line {lineno}: unknown key {key!r}")
        except ValueError as exc:
            if isinstance(exc, ParameterError):
                raise
            raise ParameterError(f"config line {lineno}: bad value {value!r}") from None
    if log_k:
        kwargs["log_k"] = log_k
    return ScatterConfig(**kwargs)


def load_config(path):
    return parse_config(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class ScatterPath:
    """Label of one output channel."""

    m: int
    resolution_factor: float
    colour: str = None
    j1: int = None
    r1: int = None
    j2: int = None
    r2: int = None

    def __post_init__(self):
        if self.m == 0:
            ok = self.colour in COLOURS and self.j1 is None and self.j2 is None
        elif self.m == 1:
            ok = self.j1 is not None and self.r1 in ORIENTATIONS and self.j2 is None
        elif self.m == 2:
            ok = (self.j1 is not None and self.j2 is not None and self.j2 > self.j1
                  and self.r1 in ORIENTATIONS and self.r2 in ORIENTATIONS)
        else:
            ok = False
        if not ok:
            raise ParameterError(f"inconsistent scattering path {self!r}")

    def label(self):
        if self.m == 0:
            body = self.colour
        elif self.m == 1:
            body = f"j1={self.j1},r1={self.r1}"
        else:
            body = f"j1={self.j1},r1={self.r1},j2={self.j2},r2={self.r2}"
        return f"m{self.m}:{body}@{self.resolution_factor!r}"

    def to_dict(self):
        return {k: v for k, v in self.__dict__.items() if v is not None}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass(frozen=True)
class SubbandEnvelope:
    path: ScatterPath
    plane: np.ndarray
    level: int  # grid the plane lives on: H / 2**level


@dataclass
class FeatureTensor:
    data: np.ndarray
    manifest: list = field(default_factory=list)

    def __post_init__(self):
        if self.data.ndim != 3:
            raise ShapeError(f"feature tensor must be channels x height x width, got {self.data.shape}")
        if self.data.shape[0] != len(self.manifest):
            raise ShapeError(
                f"{self.data.shape[0]} channels but {len(self.manifest)} manifest entries")

    @property
    def channels(self):
        return self.data.shape[0]

    @property
    def height(self):
        return self.data.shape[1]

    @property
    def width(self):
        return self.data.shape[2]


# ---------------------------------------------------------------------------
# sparse linear resampling along one axis (fixed-order multiply-add, so the
# result for an image never depends on what it is batched with)

def _apply_weights(x, axis, index, weight):
    x = np.moveaxis(np.asarray(x, dtype=np.float64), axis, -1)
    out = np.zeros(x.shape[:-1] + (index.shape[0],))
    for t in range(index.shape[1]):
        out += x[..., index[:, t]] * weight[:, t]
    return np.moveaxis(out, -1, axis)


@lru_cache(maxsize=64)
def _bilinear_weights(n_in, n_out):
    pos = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    pos = np.clip(pos, 0, n_in - 1)
    lo = np.minimum(np.floor(pos).astype(int), n_in - 1)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = pos - lo
    return np.stack([lo, hi], 1), np.stack([1 - frac, frac], 1)


@lru_cache(maxsize=64)
def _area_weights(n_in, n_out):
    scale = n_in / n_out
    width = int(math.ceil(scale)) + 1
    index = np.zeros((n_out, width), dtype=int)
    weight = np.zeros((n_out, width))
    for i in range(n_out):
        start, stop = i * scale, (i + 1) * scale
        first = int(math.floor(start))
        for t in range(width):
            j = min(first + t, n_in - 1)
            overlap = max(0.0, min(stop, first + t + 1) - max(start, first + t))
            index[i, t] = j
            weight[i, t] = overlap / scale
    return index, weight


def _resize(x, shape, method):
    weights = _bilinear_weights if method == "bilinear" else _area_weights
    out = x
    for axis, n_out in ((-2, shape[0]), (-1, shape[1])):
        n_in = out.shape[axis]
        if n_in != n_out:
            out = _apply_weights(out, axis, *weights(n_in, n_out))
    return out


def snapped_size(n, factor, levels):
    """ceil(factor * n) rounded to the nearest multiple of 2**levels."""
    step = 2 ** levels
    target = math.ceil(factor * n - 1e-9)
    return max(step, int(math.floor(target / step + 0.5)) * step)


def resample_image(image, factor, levels=2):
    """Bilinear resize by ``factor`` (>= 1), snapped to 2**levels-divisible
    dimensions.  Works on ``(..., H, W)``."""
    if not (math.isfinite(factor) and factor >= 1):
        raise ParameterError(f"resample factor must be >= 1, got {factor!r}")
    x = np.asarray(image, dtype=np.float64)
    h, w = x.shape[-2:]
    shape = (snapped_size(h, factor, levels), snapped_size(w, factor, levels))
    return _resize(x, shape, "bilinear")


# ---------------------------------------------------------------------------
# pipeline stages

def _require_divisible(shape, levels):
    step = 2 ** levels
    h, w = shape[-2:]
    if h == 0 or w == 0 or h % step or w % step:
        raise ShapeError(f"image {h}x{w} is not divisible by 2**{levels} = {step}")


def _require_rgb(image):
    x = np.asarray(image, dtype=np.float64)
    if x.ndim < 3 or x.shape[-3] != 3:
        raise ShapeError(f"expected an RGB image shaped (3, H, W), got {x.shape}")
    return x


@lru_cache(maxsize=16)
def smoothing_kernel(levels, level=0):
    """Unit-sum Gaussian with sigma = 2**levels / 2 input pixels, expressed
    on the ``2**level``-decimated grid and truncated at 4 sigma."""
    sigma = 2.0 ** levels / 2.0 / 2.0 ** level
    radius = int(math.ceil(4 * sigma))
    t = np.arange(-radius, radius + 1)
    g = np.exp(-0.5 * (t / sigma) ** 2)
    g /= g.sum()
    g.setflags(write=False)
    return g


def _smooth(x, levels, level):
    g = smoothing_kernel(levels, level)
    radius = len(g) // 2
    step = 2 ** (levels - level)
    out = x
    for axis in (-2, -1):
        moved = np.moveaxis(out, axis, 0)
        rest = moved.shape[1:]
        n_out = moved.shape[0] // step
        y = filter_rows(moved.reshape(moved.shape[0], -1), g, radius, step, 1, n_out)
        out = np.moveaxis(y.reshape((n_out,) + rest), 0, axis)
    return out


def smooth_decimate(plane, config, level=0):
    """Gaussian local average and decimation onto the ``H / 2**J`` grid.

    ``level`` says which grid ``plane`` lives on (``2**level`` coarser than
    the image); the kernel and the decimation step are scaled to match.
    """
    x = np.asarray(plane, dtype=np.float64)
    if not 0 <= level <= config.levels:
        raise ParameterError(f"level must lie in 0..{config.levels}")
    _require_divisible(x.shape, config.levels - level)
    return _smooth(x, config.levels, level)


def layer0(image, config, resolution_factor=1.0):
    """Per-channel lowpass: three envelopes on the ``H / 2**J`` grid."""
    x = _require_rgb(image)
    _require_divisible(x.shape, config.levels)
    s = smooth_decimate(x, config, 0)
    return [SubbandEnvelope(ScatterPath(0, resolution_factor, colour=c), s[..., i, :, :], config.levels)
            for i, c in enumerate(COLOURS)]


def _fused_moduli(x, config):
    pyr = dtcwt_forward(x, config.levels, config.wavelet_filters())
    # modulus per colour channel, then L2 across R, G, B
    return [np.sqrt(np.sum(complex_magnitude(band) ** 2, axis=-4)) for band in pyr.highpasses]


def layer1_envelopes(image, config, resolution_factor=1.0):
    """Colour-fused first-layer moduli, ``6 * J`` envelopes, scale-major."""
    x = _require_rgb(image)
    _require_divisible(x.shape, config.levels)
    out = []
    for j, fused in enumerate(_fused_moduli(x, config), start=1):
        for i, r in enumerate(ORIENTATIONS):
            out.append(SubbandEnvelope(ScatterPath(1, resolution_factor, j1=j, r1=r),
                                       fused[..., i, :, :], j))
    return out


def parametric_log(envelope, config):
    """log(U + k_j) where a k is configured for the envelope's scale."""
    k = config.k_for(envelope.path.j1)
    if k is None:
        return envelope
    if k <= 0:
        raise ParameterError(f"log parameter must be > 0, got {k!r}")
    u = np.asarray(envelope.plane)
    if np.any(u < 0):
        raise ParameterError("parametric log expects a non-negative envelope")
    return SubbandEnvelope(envelope.path, np.log(u + k), envelope.level)


def layer2_envelopes(u1, config):
    """Cascade each first-layer envelope through the wavelets of every
    coarser scale: ``|U1[j1, r1] * psi[j2, r2]|`` for ``j2 > j1``.

    For J = 2 the six j1 = 1 envelopes give 36 outputs.
    """
    if config.levels < 2:
        raise ParameterError("the second layer needs levels >= 2")
    fs = config.wavelet_filters()
    out = []
    for env in u1:
        j1 = env.path.j1
        depth = config.levels - j1
        if depth < 1:
            continue
        plane = np.asarray(env.plane, dtype=np.float64)
        _require_divisible(plane.shape, depth)
        pyr = dtcwt_forward(plane, depth, fs)
        for d, band in enumerate(pyr.highpasses, start=1):
            mag = complex_magnitude(band)
            for i, r in enumerate(ORIENTATIONS):
                path = ScatterPath(2, env.path.resolution_factor, j1=j1, r1=env.path.r1,
                                   j2=j1 + d, r2=r)
                out.append(SubbandEnvelope(path, mag[..., i, :, :], j1 + d))
    # order by j1, r1, then j2, r2
    out.sort(key=lambda e: (e.path.j1, ORIENTATIONS.index(e.path.r1), e.path.j2,
                            ORIENTATIONS.index(e.path.r2)))
    return out


def _one_resolution(x, config, factor):
    """Channels (..., C, H/2**J, W/2**J) plus manifest, for images already
    resampled to this resolution."""
    env0 = layer0(x, config, factor)
    env1 = [parametric_log(e, config) for e in layer1_envelopes(x, config, factor)]
    env2 = layer2_envelopes([e for e in env1 if e.path.j1 < config.levels], config)
    planes = [e.plane for e in env0]
    planes += [smooth_decimate(np.abs(e.plane), config, e.level) for e in env1]
    planes += [smooth_decimate(e.plane, config, e.level) for e in env2]
    manifest = [e.path for e in env0 + env1 + env2]
    return np.stack(planes, axis=-3), manifest


def scatter_one_resolution(image, config, resolution_factor=1.0):
    """Scattering coefficients of an image at its given size (51 channels for
    RGB input and J = 2)."""
    x = _normalise(_require_rgb(image), config)
    _require_divisible(x.shape, config.levels)
    data, manifest = _one_resolution(x, config, resolution_factor)
    if data.ndim != 3:
        raise ShapeError("scatter_one_resolution takes a single image; use extract_batch")
    return FeatureTensor(data, manifest)


def _normalise(x, config):
    return x / 255.0 if config.pixel_normalization == "byte" else x


def feature_manifest(config):
    """Channel manifest of :func:`extract_features` (independent of image)."""
    probe = np.zeros((3, 2 ** config.levels, 2 ** config.levels))
    manifest = []
    for f in config.resolution_factors:
        manifest += _one_resolution(probe, config, f)[1]
    return manifest


def output_grid(height, width, config):
    """Common spatial grid of the multi-resolution output."""
    sizes = [(snapped_size(height, f, config.levels) // 2 ** config.levels,
              snapped_size(width, f, config.levels) // 2 ** config.levels)
             for f in config.resolution_factors]
    return min(s[0] for s in sizes), min(s[1] for s in sizes)


def _extract_array(images, config):
    x = _normalise(_require_rgb(images), config)
    grid = output_grid(x.shape[-2], x.shape[-1], config)
    streams, manifest = [], []
    for f in config.resolution_factors:
        data, paths = _one_resolution(resample_image(x, f, config.levels), config, f)
        streams.append(_resize(data, grid, config.alignment))
        manifest += paths
    return np.concatenate(streams, axis=-3), manifest


def extract_features(image, config=None):
    """Multi-resolution scattering features for one RGB image (102 channels
    with the default configuration)."""
    config = config or ScatterConfig()
    x = _require_rgb(image)
    if x.ndim != 3:
        raise ShapeError("extract_features takes one (3, H, W) image; use extract_batch")
    data, manifest = _extract_array(x, config)
    return FeatureTensor(data, manifest)


def extract_batch(images, config=None, threads=1, chunk_size=64):
    """Features for a stack ``(N, 3, H, W)``; returns ``(N, C, h, w)`` and the
    manifest.  Output is bit-identical for any ``threads``/``chunk_size``."""
    config = config or ScatterConfig()
    x = _require_rgb(images)
    if x.ndim != 4:
        raise ShapeError(f"expected (N, 3, H, W), got {x.shape}")
    manifest = feature_manifest(config)
    grid = output_grid(x.shape[-2], x.shape[-1], config)
    out = np.empty((x.shape[0], len(manifest)) + grid)
    chunks = [slice(i, min(i + chunk_size, x.shape[0])) for i in range(0, x.shape[0], chunk_size)]

    def work(sl):
        out[sl] = _extract_array(x[sl], config)[0]

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, chunks))
    else:
        for sl in chunks:
            work(sl)
    return out, manifest
