"""Image I/O, patch sampling, and the synthetic degradation pipeline.

Degradation follows z = blur_rho(y) + n with n ~ N(0, (sigma/255)^2) per
element, blur first, noise second, and no clipping. All randomness flows
from seedable numpy generators so a fixed master seed reproduces the whole
pipeline bit-exactly in sequential mode.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .conv import filter2d_reflect, gaussian_kernel
from .tensor import DomainError, Tensor


class ImageIOError(IOError):
    """Unsupported or unreadable image file; message names the file."""


@dataclass
class DegradationSpec:
    sigma_range: tuple = (5.0, 30.0)   # 8-bit units
    rho_range: tuple = (0.0, 0.0)      # blur std; 0 disables blur
    blur_support: int = 21

    def __post_init__(self):
        lo, hi = self.sigma_range
        if not (0 <= lo <= hi):
            raise DomainError(f"sigma_range must satisfy 0 <= lo <= hi, got {self.sigma_range}")
        lo, hi = self.rho_range
        if not (0 <= lo <= hi):
            raise DomainError(f"rho_range must satisfy 0 <= lo <= hi, got {self.rho_range}")
        if self.blur_support % 2 != 1:
            raise DomainError(f"blur_support must be odd, got {self.blur_support}")


def make_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


def split_rng(rng: np.random.Generator, n: int) -> list:
    """Independent child streams for worker parallelism."""
    return [np.random.default_rng(s) for s in rng.bit_generator.seed_seq.spawn(n)]


def load_image(path) -> Tensor:
    """8-bit RGB PNG -> (1, 3, h, w) tensor with values byte/255."""
    path = Path(path)
    try:
        img = Image.open(path)
        img.load()
    except Exception as exc:
        raise ImageIOError(f"cannot read image {path}: {exc}") from exc
    if img.mode != "RGB":
        if img.mode in ("L", "RGBA", "P"):
            img = img.convert("RGB")
        else:
            raise ImageIOError(f"unsupported image mode {img.mode!r} in {path}")
    arr = np.asarray(img, dtype=np.float32) / 255.0
    return Tensor(arr.transpose(2, 0, 1)[None])


def save_image(t, path):
    """Clamp to [0, 1], quantize with round-half-away-from-zero, write PNG."""
    arr = t.data if isinstance(t, Tensor) else np.asarray(t)
    if arr.ndim == 4:
        if arr.shape[0] != 1:
            raise ImageIOError(f"save_image expects a single image, got batch {arr.shape[0]}")
        arr = arr[0]
    clipped = np.clip(arr, 0.0, 1.0)
    bytes8 = np.floor(clipped * 255.0 + 0.5).astype(np.uint8)
    Image.fromarray(bytes8.transpose(1, 2, 0), mode="RGB").save(path, format="PNG")


def encode_png(t) -> bytes:
    """PNG bytes of a tensor image; the same encoder the CLI and service use."""
    import io
    arr = t.data if isinstance(t, Tensor) else np.asarray(t)
    if arr.ndim == 4:
        arr = arr[0]
    clipped = np.clip(arr, 0.0, 1.0)
    bytes8 = np.floor(clipped * 255.0 + 0.5).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(bytes8.transpose(1, 2, 0), mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def decode_png(data: bytes) -> Tensor:
    import io
    try:
        img = Image.open(io.BytesIO(data))
        img.load()
    except Exception as exc:
        raise ImageIOError(f"cannot decode PNG payload: {exc}") from exc
    if img.mode != "RGB":
        img = img.convert("RGB")
    arr = np.asarray(img, dtype=np.float32) / 255.0
    return Tensor(arr.transpose(2, 0, 1)[None])


def list_dataset(root, manifest=None) -> list:
    """Directory of .png files, or a manifest (one path per line)."""
    root = Path(root)
    if manifest is not None:
        lines = Path(manifest).read_text().splitlines()
        paths = [root / line.strip() for line in lines if line.strip()]
    else:
        paths = sorted(root.glob("*.png"))
    if not paths:
        raise ImageIOError(f"no .png files found under {root}")
    return paths


def sample_patch(images: list, size: int, rng: np.random.Generator,
                 flip: bool = False) -> Tensor:
    """Uniformly random size x size crop from a uniformly random source image."""
    idx = int(rng.integers(len(images)))
    img = images[idx]
    arr = img.data if isinstance(img, Tensor) else np.asarray(img)
    _, _, h, w = arr.shape
    if h < size or w < size:
        raise DomainError(f"source image {h}x{w} smaller than patch size {size}")
    top = int(rng.integers(h - size + 1))
    left = int(rng.integers(w - size + 1))
    patch = arr[:, :, top:top + size, left:left + size].copy()
    if flip and rng.integers(2):
        patch = patch[:, :, :, ::-1].copy()
    return Tensor(patch)


def degrade(y, sigma: float, rho: float, spec: DegradationSpec,
            rng: np.random.Generator) -> Tensor:
    """z = blur_rho(y) + N(0, (sigma/255)^2); rho = 0 skips the blur."""
    if sigma < 0 or rho < 0:
        raise DomainError(f"sigma and rho must be nonnegative, got {sigma}, {rho}")
    arr = y.data if isinstance(y, Tensor) else np.asarray(y)
    if rho > 0:
        g = gaussian_kernel(spec.blur_support, rho).data
        blurred = filter2d_reflect(arr, g)
    else:
        blurred = arr
    if sigma > 0:
        noise = rng.standard_normal(arr.shape).astype(arr.dtype) * (sigma / 255.0)
        z = blurred + noise
    else:
        z = blurred if blurred is not arr else arr.copy()
    return Tensor(z)


def sample_omega(p: int, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. U(0,1) coordinates; one draw per training step."""
    if p < 1:
        raise DomainError(f"p must be >= 1, got {p}")
    return rng.random(p).astype(np.float32)


# ---------------------------------------------------------------------------
# bundled synthetic corpus

def _texture(rng, h, w):
    """Band-limited noise: white noise smoothed by a random-width Gaussian."""
    noise = rng.standard_normal((1, 1, h, w)).astype(np.float32)
    sigma = float(rng.uniform(1.0, 4.0))
    g = gaussian_kernel(13, sigma).data
    t = filter2d_reflect(np.repeat(noise, 3, axis=1), g)[0]
    t -= t.min()
    rng_span = t.max() - t.min()
    return t / rng_span if rng_span > 0 else t


def _synth_image(rng: np.random.Generator, h: int, w: int) -> np.ndarray:
    """One deterministic pseudo-natural RGB image in [0,1], shape (3, h, w)."""
    yy, xx = np.meshgrid(np.linspace(0, 1, h), np.linspace(0, 1, w), indexing="ij")
    base = np.stack([
        rng.uniform(0.1, 0.9) + rng.uniform(-0.4, 0.4) * xx
        + rng.uniform(-0.4, 0.4) * yy for _ in range(3)
    ]).astype(np.float32)

    # soft blobs
    for _ in range(int(rng.integers(3, 7))):
        cy, cx = rng.uniform(0, 1, 2)
        r = rng.uniform(0.05, 0.3)
        blob = np.exp(-(((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * r * r))).astype(np.float32)
        color = rng.uniform(-0.5, 0.5, 3).astype(np.float32)
        base += color[:, None, None] * blob

    # hard-edged rectangles for edge content
    for _ in range(int(rng.integers(2, 5))):
        y0, x0 = rng.integers(0, h - 8), rng.integers(0, w - 8)
        hh = int(rng.integers(6, max(7, h // 3)))
        ww = int(rng.integers(6, max(7, w // 3)))
        color = rng.uniform(0, 1, 3).astype(np.float32)
        base[:, y0:min(h, y0 + hh), x0:min(w, x0 + ww)] = color[:, None, None]

    # stripes
    if rng.integers(2):
        freq = float(rng.uniform(4, 16))
        phase = float(rng.uniform(0, np.pi))
        stripes = 0.5 + 0.5 * np.sin(2 * np.pi * freq * (xx * rng.uniform(-1, 1)
                                                         + yy * rng.uniform(-1, 1)) + phase)
        mask = rng.uniform(0.1, 0.35)
        base = (1 - mask) * base + mask * stripes[None].astype(np.float32)

    base += 0.15 * (_texture(rng, h, w) - 0.5)
    return np.clip(base, 0.0, 1.0)


def generate_corpus(out_dir, count: int = 24, size: int = 96, seed: int = 1234) -> list:
    """Write a deterministic synthetic PNG corpus; returns the file paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    paths = []
    for i in range(count):
        img = _synth_image(rng, size, size)
        path = out_dir / f"img_{i:03d}.png"
        save_image(img[None], path)
        paths.append(path)
    return paths
