"""Wavelet filter sets: on-disk coefficient files and their self-check."""
from dataclasses import dataclass, fields
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from ..errors import FilterIntegrityError, FilterParseError

LEVEL1_SECTIONS = (
    "level1_lowpass_a", "level1_highpass_a", "level1_lowpass_b", "level1_highpass_b",
)
QSHIFT_SECTIONS = (
    "qshift_lowpass_a", "qshift_highpass_a", "qshift_lowpass_b", "qshift_highpass_b",
)
ANALYSIS_SECTIONS = LEVEL1_SECTIONS + QSHIFT_SECTIONS
SECTIONS = ANALYSIS_SECTIONS + tuple(s + "_synthesis" for s in ANALYSIS_SECTIONS)

DEFAULT_FILTER_FILE = "near_sym_b_qshift_b.txt"

# tolerances of the integrity check
PR_TOLERANCE = 1e-10
HIGHPASS_SUM_TOLERANCE = 1e-10
LOWPASS_SUM_TOLERANCE = 1e-8
REVERSAL_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class WaveletFilterSet:
    """Analysis and synthesis coefficients for both trees.

    Level 1 uses the odd-length biorthogonal pair (identical for both trees;
    the trees differ only in sampling phase).  Levels >= 2 use the even-length
    quarter-shift pair, with tree b the time reverse of tree a.  Every lowpass
    has DC gain sqrt(2).
    """

    level1_lowpass_a: np.ndarray
    level1_highpass_a: np.ndarray
    level1_lowpass_b: np.ndarray
    level1_highpass_b: np.ndarray
    qshift_lowpass_a: np.ndarray
    qshift_highpass_a: np.ndarray
    qshift_lowpass_b: np.ndarray
    qshift_highpass_b: np.ndarray
    level1_lowpass_a_synthesis: np.ndarray
    level1_highpass_a_synthesis: np.ndarray
    level1_lowpass_b_synthesis: np.ndarray
    level1_highpass_b_synthesis: np.ndarray
    qshift_lowpass_a_synthesis: np.ndarray
    qshift_highpass_a_synthesis: np.ndarray
    qshift_lowpass_b_synthesis: np.ndarray
    qshift_highpass_b_synthesis: np.ndarray
    source: str = "<memory>"

    def __post_init__(self):
        for f in fields(self):
            if f.name == "source":
                continue
            arr = np.array(getattr(self, f.name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, f.name, arr)

    def coefficients(self):
        return {name: getattr(self, name) for name in SECTIONS}


def parse_filter_text(text, source="<string>"):
    """Parse coefficient-file text into a dict of section -> (header line,
    coefficients).  Raises FilterParseError naming the offending line."""
    sections = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise FilterParseError(f"unterminated section header {line!r}", lineno)
            name = line[1:-1].strip()
            if name not in SECTIONS:
                raise FilterParseError(f"unknown section {name!r}", lineno)
            if name in sections:
                raise FilterParseError(f"duplicate section {name!r}", lineno)
            sections[name] = (lineno, [])
            current = name
            continue
        if current is None:
            raise FilterParseError("coefficient outside of any section", lineno)
        try:
            value = float(line)
        except ValueError:
            raise FilterParseError(f"not a decimal coefficient: {line!r}", lineno) from None
        if not np.isfinite(value):
            raise FilterParseError(f"non-finite coefficient {line!r}", lineno)
        sections[current][1].append(value)
    end = len(text.splitlines()) + 1
    missing = [s for s in SECTIONS if s not in sections]
    if missing:
        raise FilterParseError(f"{source}: missing section(s) {', '.join(missing)}", end)
    _check_lengths(sections)
    return {name: np.array(vals) for name, (_, vals) in sections.items()}


def _check_lengths(sections):
    def length(name):
        return len(sections[name][1])

    def odd_one_out(group, parity):
        for name in group:
            if length(name) == 0:
                raise FilterParseError(f"section {name!r} is empty", sections[name][0])
            if length(name) % 2 != parity:
                kind = "odd" if parity else "even"
                raise FilterParseError(
                    f"section {name!r} has {length(name)} coefficients; expected an {kind} count",
                    sections[name][0])
        lengths = [length(n) for n in group]
        common = max(set(lengths), key=lengths.count)
        for name in group:
            if length(name) != common:
                raise FilterParseError(
                    f"section {name!r} has {length(name)} coefficients, its partners have {common}",
                    sections[name][0])

    s = "_synthesis"
    odd_one_out(["level1_lowpass_a", "level1_lowpass_b",
                 "level1_highpass_a" + s, "level1_highpass_b" + s], 1)
    odd_one_out(["level1_highpass_a", "level1_highpass_b",
                 "level1_lowpass_a" + s, "level1_lowpass_b" + s], 1)
    odd_one_out([n for n in SECTIONS if n.startswith("qshift")], 0)


def _periodic_roundtrip(h0, h1, g0, g1, x, phase):
    """Two-channel decimated analysis/synthesis on a periodic signal; returns
    the relative error against the ideally delayed input."""
    n = len(x)

    def cconv(a, h):
        out = np.zeros(n)
        for i, c in enumerate(h):
            out += c * np.roll(a, i)
        return out

    rolled = np.roll(x, -phase)
    lo = cconv(rolled, h0)[0::2]
    hi = cconv(rolled, h1)[0::2]
    up_lo = np.zeros(n)
    up_hi = np.zeros(n)
    up_lo[0::2] = lo
    up_hi[0::2] = hi
    y = cconv(up_lo, g0) + cconv(up_hi, g1)
    delay = (len(h0) + len(g0) - 2) // 2
    expected = np.roll(rolled, delay)
    return np.linalg.norm(y - expected) / np.linalg.norm(x)


def check_filter_set(fs, n_samples=64, seed=0):
    """Run the integrity self-check; returns a dict of measured values and
    raises FilterIntegrityError on the first violated property."""
    c = fs.coefficients()
    report = {}
    for name, h in c.items():
        total = float(np.sum(h))
        if "highpass" in name:
            report[f"sum_{name}"] = total
            if abs(total) > HIGHPASS_SUM_TOLERANCE:
                raise FilterIntegrityError(f"{name} sums to {total:.3e}, not 0")
        else:
            report[f"sum_{name}"] = total
            if abs(total - np.sqrt(2.0)) > LOWPASS_SUM_TOLERANCE:
                raise FilterIntegrityError(f"{name} sums to {total!r}, not sqrt(2)")
    for kind in ("lowpass", "highpass"):
        for suffix in ("", "_synthesis"):
            a = c[f"level1_{kind}_a{suffix}"]
            b = c[f"level1_{kind}_b{suffix}"]
            if not np.array_equal(a, b):
                raise FilterIntegrityError(
                    f"level-1 {kind}{suffix} filters must be identical for both trees")
            a = c[f"qshift_{kind}_a{suffix}"]
            b = c[f"qshift_{kind}_b{suffix}"]
            if np.max(np.abs(a[::-1] - b)) > REVERSAL_TOLERANCE:
                raise FilterIntegrityError(
                    f"qshift {kind}{suffix} tree b is not the reverse of tree a")
    x = np.random.default_rng(seed).standard_normal(n_samples)
    worst = 0.0
    for prefix in ("level1", "qshift"):
        for tree, phase in (("a", 0), ("b", 1)):
            err = _periodic_roundtrip(
                c[f"{prefix}_lowpass_{tree}"], c[f"{prefix}_highpass_{tree}"],
                c[f"{prefix}_lowpass_{tree}_synthesis"], c[f"{prefix}_highpass_{tree}_synthesis"],
                x, phase)
            report[f"roundtrip_{prefix}_{tree}"] = err
            worst = max(worst, err)
            if not err <= PR_TOLERANCE:
                raise FilterIntegrityError(
                    f"{prefix} tree {tree} round trip error {err:.3e} exceeds {PR_TOLERANCE:g}")
    report["roundtrip_worst"] = worst
    return report


def filter_set_from_text(text, source="<string>"):
    fs = WaveletFilterSet(**parse_filter_text(text, source), source=source)
    check_filter_set(fs)
    return fs


def load_filter_set(path):
    """Load and self-check a coefficient file (see docs/formats.md)."""
    path = Path(path)
    return filter_set_from_text(path.read_text(encoding="utf-8"), source=str(path))


@lru_cache(maxsize=1)
def default_filters():
    """The shipped near_sym_b / qshift_b set (cached; immutable)."""
    ref = resources.files("dtscatter").joinpath("data").joinpath(DEFAULT_FILTER_FILE)
    return filter_set_from_text(ref.read_text(encoding="utf-8"), source=DEFAULT_FILTER_FILE)


def write_filter_text(fs):
    """Serialise a filter set in the coefficient-file format."""
    lines = ["# DTCWT filter coefficients"]
    for name in SECTIONS:
        lines.append("")
        lines.append(f"[{name}]")
        lines.extend(repr(float(v)) for v in getattr(fs, name))
    return "\n".join(lines) + "\n"
