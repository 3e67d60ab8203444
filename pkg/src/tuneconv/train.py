"""Adam optimization and the parametric multi-loss training loop.

Each step draws one omega ~ U(0,1)^p shared by the whole batch, synthesizes
a degraded batch, builds the omega-dependent targets, runs the forward pass
with the same omega threaded through every tunable layer, and applies a
bias-corrected Adam update. Constant or cosine-decayed learning rate, no
weight decay, no gradient clipping; a NaN/Inf loss aborts with a diagnostic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import tensor as T
from .checkpoint import Checkpoint, checkpoint_from_model
from .data import DegradationSpec, degrade, list_dataset, load_image, sample_omega, sample_patch
from .layers import Model, ModelConfig, build_backbone
from .objectives import (MultiLossSpec, build_targets, l1_loss, multi_loss,
                         psnr, psnr_eta)
from .tensor import DomainError, ShapeError, Tensor


class TrainingDiverged(RuntimeError):
    """Loss became non-finite; carries the step and the offending omega."""


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0


def adam_step(params: dict, grads: dict, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """Standard bias-corrected Adam update, in place on the param arrays."""
    state.step += 1
    t = state.step
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeError(
                f"adam_step: gradient for {name!r} has shape {g.shape}, "
                f"param is {p.shape}")
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1 - beta1) * g
        v *= beta2
        v += (1 - beta2) * (g * g)
        mhat = m / (1 - beta1 ** t)
        vhat = v / (1 - beta2 ** t)
        p -= lr * mhat / (np.sqrt(vhat) + eps)


@dataclass
class TrainConfig:
    iterations: int = 5000
    batch_size: int = 8
    patch_size: int = 32
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    model: ModelConfig = field(default_factory=ModelConfig)
    objectives: list = field(default_factory=lambda: [["rec", 1.0], ["noise", 1.0]])
    degradation: DegradationSpec = field(default_factory=DegradationSpec)
    checkpoint_every: int = 0
    eval_every: int = 0
    dataset_dir: str = ""
    checkpoint_path: str = ""
    fixed_omega: list = None  # freeze omega (vanilla training) when set
    nu: float = 0.9
    gamma: float = 8.0
    omega_per_sample: bool = False
    lr_schedule: str = "constant"  # or "cosine" (decays to 2% of peak)

    _KEYS = ("iterations", "batch_size", "patch_size", "learning_rate",
             "beta1", "beta2", "eps", "seed", "model", "objectives",
             "degradation", "checkpoint_every", "eval_every", "dataset_dir",
             "checkpoint_path", "fixed_omega", "nu", "gamma",
             "omega_per_sample", "lr_schedule")

    def __post_init__(self):
        if self.iterations < 0 or self.batch_size < 1 or self.patch_size < 1:
            raise DomainError("iterations must be >= 0, batch_size and "
                              "patch_size must be positive")
        if self.lr_schedule not in ("constant", "cosine"):
            raise DomainError(f"unknown lr_schedule {self.lr_schedule!r}")
        self.loss_spec = MultiLossSpec([(o, float(l)) for o, l in self.objectives])
        if self.model.variant == "tunable" and self.loss_spec.p != self.model.p:
            raise DomainError(
                f"objective count {self.loss_spec.p} must equal model p {self.model.p}")

    @classmethod
    def from_file(cls, path) -> "TrainConfig":
        raw = json.loads(Path(path).read_text())
        unknown = set(raw) - set(cls._KEYS)
        if unknown:
            raise DomainError(f"unknown config keys: {sorted(unknown)}")
        if "model" in raw:
            raw["model"] = ModelConfig.from_dict(raw["model"])
        if "degradation" in raw:
            d = raw["degradation"]
            raw["degradation"] = DegradationSpec(
                tuple(d.get("sigma_range", (5.0, 30.0))),
                tuple(d.get("rho_range", (0.0, 0.0))),
                int(d.get("blur_support", 21)))
        return cls(**raw)


def step_lr(cfg: TrainConfig, step: int) -> float:
    """Learning rate for a given 0-based step index."""
    if cfg.lr_schedule == "constant" or cfg.iterations <= 1:
        return cfg.learning_rate
    floor = 0.02 * cfg.learning_rate
    t = step / (cfg.iterations - 1)
    return floor + (cfg.learning_rate - floor) * 0.5 * (1 + np.cos(np.pi * t))


def _batch(images, cfg: TrainConfig, rng) -> tuple:
    spec = cfg.degradation
    sigma = float(rng.uniform(*spec.sigma_range))
    rho = float(rng.uniform(*spec.rho_range))
    patches = [sample_patch(images, cfg.patch_size, rng) for _ in range(cfg.batch_size)]
    y = np.concatenate([p.data for p in patches], axis=0)
    z = degrade(y, sigma, rho, spec, rng).data
    return y, z, sigma, rho


def train_step(model: Model, images, cfg: TrainConfig, state: AdamState,
               rng) -> float:
    """One optimization step; returns the scalar loss value."""
    spec = cfg.loss_spec
    if cfg.fixed_omega is not None:
        omega = np.asarray(cfg.fixed_omega, dtype=np.float32)
    else:
        omega = sample_omega(spec.p, rng)
    y, z, _, _ = _batch(images, cfg, rng)

    targets = build_targets(spec, y, z, omega, nu=cfg.nu, gamma=cfg.gamma)
    x = Tensor(z)
    omega_t = Tensor(omega) if model.config.variant == "tunable" else None
    pred = model.forward(x, omega_t)
    per_obj = [l1_loss(pred, t) for t in targets]
    loss = multi_loss(omega, spec, per_obj)
    value = loss.item()
    if not np.isfinite(value):
        raise TrainingDiverged(
            f"non-finite loss {value} at step {state.step} (omega={omega.tolist()})")

    if np.any(omega > 0):  # omega = 0 corner: exact zero loss, zero gradient
        T.backward(loss)
        params = dict(model.named_params())
        grads = {name: (t.grad if t.grad is not None else np.zeros_like(t.data))
                 for name, t in params.items()}
        adam_step({n: t.data for n, t in params.items()}, grads, state,
                  step_lr(cfg, state.step), cfg.beta1, cfg.beta2, cfg.eps)
        T.zero_grads(params.values())
    else:
        state.step += 1
    return value


def evaluate(model: Model, images, sigma: float, omega_grid, spec: MultiLossSpec,
             nu: float = 0.9, seed: int = 9999) -> list:
    """PSNR / PSNR_eta over a held-out set at fixed omega values.

    Noise realizations are fixed per image index so sweeps are comparable.
    """
    ids = spec.ids
    noise_idx = ids.index("noise") if "noise" in ids else None
    rows = []
    dspec = DegradationSpec((0.0, max(sigma, 30.0)), (0.0, 0.0))
    degraded = []
    for i, img in enumerate(images):
        rng = np.random.default_rng(seed + i)
        y = img.data if isinstance(img, Tensor) else np.asarray(img)
        degraded.append((y, degrade(y, sigma, 0.0, dspec, rng).data))
    for omega in omega_grid:
        omega = np.asarray(omega, dtype=np.float32)
        psnrs, psnr_etas = [], []
        with T.no_grad():
            for y, z in degraded:
                omega_t = Tensor(omega) if model.config.variant == "tunable" else None
                pred = model.forward(Tensor(z), omega_t).data
                psnrs.append(psnr(pred, y))
                if noise_idx is not None:
                    psnr_etas.append(psnr_eta(pred, y, z,
                                              float(omega[noise_idx]), nu))
        rows.append({
            "omega": omega.tolist(),
            "psnr": float(np.mean(psnrs)),
            "psnr_eta": float(np.mean(psnr_etas)) if psnr_etas else float("nan"),
        })
    return rows


def train(cfg: TrainConfig, images=None, log_every: int = 0,
          on_checkpoint=None) -> tuple:
    """Run the full loop; returns (model, history).

    history is a list of per-step loss values. Checkpoints are written to
    cfg.checkpoint_path every cfg.checkpoint_every steps when both are set.
    """
    if images is None:
        paths = list_dataset(cfg.dataset_dir)
        images = [load_image(p) for p in paths]
    model = build_backbone(cfg.model, seed=cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    state = AdamState()
    history = []
    for step in range(cfg.iterations):
        value = train_step(model, images, cfg, state, rng)
        history.append(value)
        if log_every and (step + 1) % log_every == 0:
            recent = float(np.mean(history[-log_every:]))
            print(f"step {step + 1}/{cfg.iterations} loss {recent:.5f}")
        if (cfg.checkpoint_every and cfg.checkpoint_path
                and (step + 1) % cfg.checkpoint_every == 0):
            ckpt = checkpoint_from_model(model, cfg.loss_spec.ids,
                                         cfg.loss_spec.lambdas, cfg.seed, step + 1)
            ckpt.save(cfg.checkpoint_path)
            if on_checkpoint:
                on_checkpoint(step + 1, ckpt)
    if cfg.checkpoint_path:
        checkpoint_from_model(model, cfg.loss_spec.ids, cfg.loss_spec.lambdas,
                              cfg.seed, cfg.iterations).save(cfg.checkpoint_path)
    return model, history
