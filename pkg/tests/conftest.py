import os
from pathlib import Path

import numpy as np
import pytest

from dtscatter._backend import BACKENDS, set_backend

CIFAR_ENV = "DTSCATTER_CIFAR10_DIR"


def cifar_dir():
    """The ``cifar-10-batches-bin`` directory named by the environment, if
    it holds the standard files."""
    value = os.environ.get(CIFAR_ENV)
    if not value:
        return None
    path = Path(value)
    needed = [f"data_batch_{i}.bin" for i in range(1, 6)] + ["test_batch.bin"]
    return path if all((path / n).is_file() for n in needed) else None


def write_cifar_batch(path, images, labels):
    """Write ``(N, 3, 32, 32)`` images in [0, 1] as a CIFAR-10 batch."""
    pixels = np.round(np.asarray(images) * 255).astype(np.uint8).reshape(len(labels), -1)
    records = np.concatenate([np.asarray(labels, dtype=np.uint8)[:, None], pixels], axis=1)
    records.tofile(path)
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def needs_cifar():
    d = cifar_dir()
    if d is None:
        pytest.skip(f"CIFAR-10 binary batches not available (set {CIFAR_ENV})")
    return d


@pytest.fixture(params=sorted(BACKENDS))
def backend(request):
    previous = set_backend(request.param)
    yield request.param
    set_backend(previous)


def numeric_gradient(f, params, eps=1e-6):
    """Central differences of scalar ``f()`` w.r.t. each array in ``params``
    (perturbed in place)."""
    grads = []
    for p in params:
        g = np.zeros_like(p)
        for i in np.ndindex(p.shape):
            old = p[i]
            p[i] = old + eps
            up = f()
            p[i] = old - eps
            down = f()
            p[i] = old
            g[i] = (up - down) / (2 * eps)
        grads.append(g)
    return grads


def gradient_check_error(seed, n=10, dim=6, classes=4, weight_decay=0.0005):
    """Relative error between the probe's analytic gradient and central
    differences on a random problem."""
    from dtscatter.linear_probe import loss_and_grad

    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, dim))
    y = rng.integers(0, classes, n)
    w = rng.standard_normal((classes, dim))
    b = rng.standard_normal(classes)
    _, gw, gb = loss_and_grad(w, b, x, y, weight_decay)
    nw, nb = numeric_gradient(lambda: loss_and_grad(w, b, x, y, weight_decay)[0], [w, b])
    analytic = np.concatenate([gw.ravel(), gb])
    numeric = np.concatenate([nw.ravel(), nb])
    return np.linalg.norm(analytic - numeric) / max(np.linalg.norm(analytic),
                                                    np.linalg.norm(numeric), 1e-300)
