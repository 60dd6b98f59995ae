"""``dtscatter`` command line: extract, probe, eval and check.

Every command prints a report of ``key=value`` lines to stdout.  Exit
codes: 0 success, 1 usage or parameter error, 2 data or format error,
3 numeric failure (divergence or a failed check).
"""
import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import dataio, diagnostics
from .errors import DataError, DivergenceError, FormatError, ParameterError, ShapeError
from .linear_probe import ProbeHyperparams, evaluate_probe, load_model, save_model, train_probe
from .scatternet import ScatterConfig, extract_batch, load_config

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
SUITES = ("pr", "oracle", "counts", "orientation", "shift", "skew")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


class Report:
    def __init__(self, command):
        self.lines = [("command", command)]
        self.failed = False

    def add(self, key, value):
        if isinstance(value, float):
            value = f"{value:.6g}"
        elif isinstance(value, (list, tuple, np.ndarray)):
            value = ",".join(str(v) for v in value)
        self.lines.append((key, value))

    def timed(self, key, start):
        self.add(f"time.{key}_s", round(time.perf_counter() - start, 3))

    def render(self):
        return "".join(f"{k}={v}\n" for k, v in self.lines)


def parse_report(text):
    """Inverse of :meth:`Report.render` (later keys win)."""
    out = {}
    for line in text.splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


# ---------------------------------------------------------------------------

def _load_images(path, split):
    """Images, labels and a dataset description for a CIFAR batch file,
    a ``cifar-10-batches-bin`` directory, a PPM file or a directory of PPMs."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset not found: {path}")
    if path.is_dir():
        if any(path.glob("*.bin")):
            images, labels = dataio.load_cifar10_split(path, split)
            return images, labels
        ppms = sorted(path.glob("*.ppm"))
        if not ppms:
            raise DataError(f"{path}: no CIFAR batches or PPM files found")
        return _stack_ppms(ppms)
    if path.suffix.lower() == ".ppm":
        return _stack_ppms([path])
    return dataio.read_cifar10_arrays(path)


def _stack_ppms(paths):
    images = [dataio.load_ppm(p) for p in paths]
    if len({im.shape for im in images}) > 1:
        raise DataError("PPM images in one run must share a size")
    return np.stack(images), np.full(len(images), -1)


def _config(path):
    return load_config(path) if path else ScatterConfig()


def cmd_extract(args, report):
    config = _config(args.config)
    t = time.perf_counter()
    images, labels = _load_images(args.dataset, args.split)
    report.timed("load", t)
    if args.subset:
        index = dataio.balanced_indices(labels, args.subset, args.seed)
    else:
        index = np.arange(len(labels))
    images, labels = images[index], labels[index]
    t = time.perf_counter()
    if args.features == "pixels":
        feats = images
        paths = [{"pixel_channel": c} for c in "RGB"]
    else:
        feats, manifest = extract_batch(images, config, threads=args.threads)
        paths = [p.to_dict() for p in manifest]
    report.timed("extract", t)
    t = time.perf_counter()
    dataio.write_features(
        args.out, feats, labels=labels, paths=paths, seed=args.seed,
        config_hash=config.config_hash(), source_indices=index, scalar_width=args.scalar_width,
        extra={"dataset": str(args.dataset), "split": args.split, "subset": args.subset,
               "features": args.features, "config": config.to_text()})
    report.timed("write", t)
    for key, value in (("dataset", args.dataset), ("features", args.features),
                       ("config_hash", config.config_hash()), ("seed", args.seed),
                       ("subset", args.subset), ("count", feats.shape[0]),
                       ("channels", feats.shape[1]), ("height", feats.shape[2]),
                       ("width", feats.shape[3]), ("scalar_width", args.scalar_width),
                       ("threads", args.threads), ("output", args.out)):
        report.add(key, value)


def _hyper(args):
    base = ProbeHyperparams()
    return ProbeHyperparams(
        learning_rate=base.learning_rate if args.learning_rate is None else args.learning_rate,
        momentum=base.momentum if args.momentum is None else args.momentum,
        weight_decay=base.weight_decay if args.weight_decay is None else args.weight_decay,
        epochs=base.epochs if args.epochs is None else args.epochs,
        batch_size=args.batch_size,
        seed=args.seed)


def cmd_probe(args, report):
    train = dataio.read_features(args.train)
    test = dataio.read_features(args.test)
    if train.features.shape[1:] != test.features.shape[1:]:
        raise ParameterError(
            f"train features {train.features.shape[1:]} and test features "
            f"{test.features.shape[1:]} differ in shape")
    hyper = _hyper(args)
    t = time.perf_counter()
    model = train_probe(train.features, train.labels, hyper)
    report.timed("train", t)
    t = time.perf_counter()
    train_eval = evaluate_probe(model, train.features, train.labels)
    test_eval = evaluate_probe(model, test.features, test.labels)
    report.timed("eval", t)
    if args.out:
        save_model(model, args.out, extra={"train": str(args.train),
                                           "feature_shape": list(train.features.shape[1:])})
        report.add("output", args.out)
    for key, value in (("train", args.train), ("test", args.test),
                       ("config_hash", train.config_hash),
                       ("learning_rate", hyper.learning_rate), ("momentum", hyper.momentum),
                       ("weight_decay", hyper.weight_decay), ("epochs", hyper.epochs),
                       ("batch_size", hyper.resolved_batch_size(train.features.shape[0])),
                       ("seed", hyper.seed), ("train_count", train.features.shape[0]),
                       ("test_count", test.features.shape[0]),
                       ("initial_loss", model.loss_curve[0]), ("final_loss", model.loss_curve[-1]),
                       ("train_error", train_eval.error), ("test_error", test_eval.error)):
        report.add(key, value)


def cmd_eval(args, report):
    model = load_model(args.model)
    data = dataio.read_features(args.features)
    result = evaluate_probe(model, data.features, data.labels)
    report.add("model", args.model)
    report.add("features", args.features)
    report.add("count", data.features.shape[0])
    report.add("error", result.error)
    for c, row in enumerate(result.confusion):
        report.add(f"confusion.{c}", list(row))


def _check(report, name, ok, **metrics):
    for key, value in metrics.items():
        report.add(f"{name}.{key}", value)
    report.add(f"check.{name}", "pass" if ok else "fail")
    report.failed |= not ok


def _check_images(args):
    if args.dataset:
        images, _ = _load_images(args.dataset, args.split)
        return images[:args.count], "dataset"
    return diagnostics.sample_crops(args.count, seed=args.seed), "bundled-samples"


def cmd_check(args, report):
    suites = SUITES if args.suite == "all" else (args.suite,)
    for suite in suites:
        t = time.perf_counter()
        if suite == "pr":
            err = diagnostics.reconstruction_errors(count=20, seed=args.seed)
            _check(report, "pr", err.max() <= 1e-10, max_relative_error=float(err.max()))
        elif suite == "oracle":
            err = diagnostics.oracle_errors(count=6, seed=args.seed)
            _check(report, "oracle", err.max() <= 1e-8, max_relative_error=float(err.max()))
        elif suite == "counts":
            total, per = diagnostics.channel_counts(_config(args.config))
            ok = total == 102 and all(v == {0: 3, 1: 12, 2: 36} for v in per.values())
            _check(report, "counts", ok, total=total,
                   per_resolution=[sum(v.values()) for v in per.values()])
        elif suite == "orientation":
            fr = diagnostics.orientation_fractions(levels=(1, 2))
            _check(report, "orientation", min(fr.values()) >= 0.8,
                   min_fraction=min(fr.values()))
        elif suite == "shift":
            images, source = _check_images(args)
            ch = diagnostics.translation_changes(images, _config(args.config))
            ratio = float(ch["scattering"].mean() / ch["modulus"].mean())
            ordered = bool(np.all(ch["scattering"] < ch["modulus"])
                           and np.all(ch["modulus"] < ch["complex"]))
            _check(report, "shift", ordered and ratio < 1, source=source,
                   images=len(images), complex=float(ch["complex"].mean()),
                   modulus=float(ch["modulus"].mean()),
                   scattering=float(ch["scattering"].mean()), s_over_u=ratio)
        elif suite == "skew":
            images, source = _check_images(args)
            raw, logged = diagnostics.log_symmetry(images, _config(args.config))
            _check(report, "skew", abs(logged) < abs(raw), source=source,
                   images=len(images), raw=raw, logged=logged)
        report.timed(suite, t)
    report.add("status", "fail" if report.failed else "pass")


def build_parser():
    p = _Parser(prog="dtscatter", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    e = sub.add_parser("extract", help="compute features for a dataset")
    e.add_argument("dataset", help="CIFAR-10 batch file or directory, or PPM file/directory")
    e.add_argument("--config", help="scattering config file (key = value lines)")
    e.add_argument("--subset", type=int, default=0,
                   help="balanced subset size; 0 extracts everything")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", required=True)
    e.add_argument("--split", choices=("train", "test"), default="train")
    e.add_argument("--features", choices=("scatter", "pixels"), default="scatter")
    e.add_argument("--scalar-width", type=int, choices=(4, 8), default=4)
    e.add_argument("--threads", type=int, default=1)

    pr = sub.add_parser("probe", help="train a linear probe")
    pr.add_argument("train")
    pr.add_argument("test")
    pr.add_argument("--out")
    pr.add_argument("--epochs", type=int)
    pr.add_argument("--batch-size", type=int)
    pr.add_argument("--learning-rate", type=float)
    pr.add_argument("--momentum", type=float)
    pr.add_argument("--weight-decay", type=float)
    pr.add_argument("--seed", type=int, default=0)

    ev = sub.add_parser("eval", help="evaluate a saved probe")
    ev.add_argument("model")
    ev.add_argument("features")

    c = sub.add_parser("check", help="run a property suite")
    c.add_argument("suite", choices=SUITES + ("all",))
    c.add_argument("--config")
    c.add_argument("--dataset", help="use these images instead of the bundled samples")
    c.add_argument("--split", choices=("train", "test"), default="test")
    c.add_argument("--count", type=int, default=100)
    c.add_argument("--seed", type=int, default=0)
    return p


COMMANDS = {"extract": cmd_extract, "probe": cmd_probe, "eval": cmd_eval, "check": cmd_check}


def main(argv=None, stdout=None):
    stdout = stdout or sys.stdout
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "threads", 1) < 1:
            raise UsageError("--threads must be >= 1")
    except UsageError as exc:
        print(f"dtscatter: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report = Report(args.command)
    try:
        COMMANDS[args.command](args, report)
    except (ParameterError, ShapeError) as exc:
        code, msg = EXIT_USAGE, exc
    except (FileNotFoundError, DataError, FormatError, OSError) as exc:
        code, msg = EXIT_DATA, exc
    except (DivergenceError, FloatingPointError) as exc:
        code, msg = EXIT_NUMERIC, exc
    else:
        stdout.write(report.render())
        return EXIT_NUMERIC if report.failed else EXIT_OK
    stdout.write(report.render())
    print(f"dtscatter: error: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
