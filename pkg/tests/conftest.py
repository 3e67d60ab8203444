import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from tuneconv import tensor as T
from tuneconv.tensor import Tensor

CACHE_DIR = Path(__file__).resolve().parent.parent / ".cache"


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    from tuneconv.data import generate_corpus
    d = tmp_path_factory.mktemp("corpus")
    generate_corpus(d, count=24, size=96, seed=1234)
    return d


@pytest.fixture(scope="session")
def corpus_images(corpus_dir):
    from tuneconv.data import list_dataset, load_image
    return [load_image(p) for p in list_dataset(corpus_dir)]


def numeric_grad(f, params, h=1e-3):
    """Central finite differences of scalar-valued f w.r.t. each param tensor.

    Params must be float64 so the forward recompute runs in double precision.
    """
    grads = []
    for p in params:
        assert p.data.dtype == np.float64, "gradient checks recompute in 64-bit"
        g = np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            hi = f().item()
            flat[i] = orig - h
            lo = f().item()
            flat[i] = orig
            gflat[i] = (hi - lo) / (2 * h)
        grads.append(g)
    return grads


def check_gradients(f, params, h=1e-3, rtol=1e-4):
    """Backprop through f() and compare against central differences."""
    loss = f()
    T.backward(loss)
    analytic = [p.grad.copy() for p in params]
    T.zero_grads(params)
    numeric = numeric_grad(f, params, h)
    for a, n in zip(analytic, numeric):
        scale = max(np.abs(n).max(), np.abs(a).max(), 1e-8)
        rel = np.abs(a - n).max() / scale
        assert rel < rtol, f"gradient mismatch: rel err {rel:.2e}"


def f64_tensor(rng, shape, lo=-1.0, hi=1.0, requires_grad=True):
    return Tensor(rng.uniform(lo, hi, size=shape).astype(np.float64),
                  requires_grad=requires_grad)


def cached_training_run(key: str, build_fn):
    """Train once and reuse across pytest invocations via an on-disk cache.

    build_fn() must return a tuneconv Checkpoint; the cache key should encode
    every input that affects the result.
    """
    from tuneconv.checkpoint import Checkpoint
    CACHE_DIR.mkdir(exist_ok=True)
    digest = hashlib.sha256(key.encode()).hexdigest()[:16]
    path = CACHE_DIR / f"{digest}.tcnv"
    if path.exists():
        try:
            return Checkpoint.load(path)
        except Exception:
            path.unlink()
    ckpt = build_fn()
    ckpt.save(path)
    return ckpt
