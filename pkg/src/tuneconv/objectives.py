"""Parametric multi-loss, objective targets, and image quality metrics.

The total training loss is sum_i omega_i * lambda_i * L_i, with the same
omega vector that drives the tunable layers. Targets for the noise and blur
objectives are themselves omega-dependent:

- noise preservation target: y + omega * nu * (z - y), nu = 0.9
- sharpening target: y_eta + omega * gamma * (y_eta - g (*) y_eta),
  gamma = 8, g a 9x9 Gaussian with sigma 2.5, reflect padding

Image values live in [0, 1]; targets are never clipped.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .conv import filter2d_reflect, gaussian_kernel
from .tensor import DomainError, ShapeError, Tensor

NU_DEFAULT = 0.9
GAMMA_DEFAULT = 8.0
UNSHARP_SIZE = 9
UNSHARP_SIGMA = 2.5
PSNR_CAP_DB = 100.0

OBJECTIVE_IDS = ("rec", "noise", "blur")


@dataclass
class TuneParams:
    """The p interactive parameters, each in [0, 1] (not necessarily convex)."""
    omega: np.ndarray

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=np.float32).reshape(-1)
        if self.omega.size < 1:
            raise DomainError("omega must have at least one coordinate")
        if np.any(self.omega < 0) or np.any(self.omega > 1):
            raise DomainError(f"omega must lie in [0,1]^p, got {self.omega}")

    @property
    def p(self) -> int:
        return self.omega.size

    def as_tensor(self) -> Tensor:
        return Tensor(self.omega)


@dataclass
class MultiLossSpec:
    """Ordered (objective_id, lambda) pairs; the order indexes omega."""
    objectives: list

    def __post_init__(self):
        if len(self.objectives) < 1:
            raise DomainError("multi-loss needs at least one objective")
        for obj_id, lam in self.objectives:
            if obj_id not in OBJECTIVE_IDS:
                raise DomainError(f"unknown objective id {obj_id!r}")
            if lam < 0:
                raise DomainError(f"lambda for {obj_id!r} must be >= 0, got {lam}")

    @property
    def p(self) -> int:
        return len(self.objectives)

    @property
    def ids(self) -> list:
        return [obj_id for obj_id, _ in self.objectives]

    @property
    def lambdas(self) -> list:
        return [lam for _, lam in self.objectives]


def _data(x) -> np.ndarray:
    return x.data if isinstance(x, Tensor) else np.asarray(x)


def l1_loss(pred: Tensor, target) -> Tensor:
    """Mean absolute difference, differentiable in pred."""
    t = target if isinstance(target, Tensor) else Tensor(target)
    return T.mean(T.absval(T.sub(pred, t.detach())))


rec_loss = l1_loss
noise_loss = l1_loss
blur_loss = l1_loss


def noise_target(y, z, omega_noise: float, nu: float = NU_DEFAULT) -> Tensor:
    """y_eta = y + omega * nu * (z - y): keeps a controlled residual-noise
    fraction; omega is the coordinate bound to the noise objective's slot."""
    yd, zd = _data(y), _data(z)
    if yd.shape != zd.shape:
        raise ShapeError(f"noise_target: shapes differ, {yd.shape} vs {zd.shape}")
    if not (0.0 <= omega_noise <= 1.0):
        raise DomainError(f"noise_target: omega must be in [0,1], got {omega_noise}")
    if not (0.0 <= nu <= 1.0):
        raise DomainError(f"noise_target: nu must be in [0,1], got {nu}")
    return Tensor(yd + omega_noise * nu * (zd - yd))


def blur_target(y_eta, omega_blur: float, gamma: float = GAMMA_DEFAULT,
                g: Tensor = None) -> Tensor:
    """Unsharp-mask target: y_eta + omega * gamma * (y_eta - g (*) y_eta)."""
    if g is None:
        g = gaussian_kernel(UNSHARP_SIZE, UNSHARP_SIGMA)
    gd = _data(g)
    if abs(float(gd.sum()) - 1.0) > 1e-5:
        raise DomainError(
            f"blur_target: filter must be normalized, sums to {float(gd.sum())}")
    if not (0.0 <= omega_blur <= 1.0):
        raise DomainError(f"blur_target: omega must be in [0,1], got {omega_blur}")
    if gamma < 0:
        raise DomainError(f"blur_target: gamma must be >= 0, got {gamma}")
    yd = _data(y_eta)
    low = filter2d_reflect(yd, gd)
    return Tensor(yd + omega_blur * gamma * (yd - low))


def multi_loss(omega, spec: MultiLossSpec, per_objective: list) -> Tensor:
    """sum_i omega_i * lambda_i * L_i over the spec's objective order."""
    om = np.asarray(_data(omega), dtype=np.float64).reshape(-1)
    if om.size != spec.p or len(per_objective) != spec.p:
        raise ShapeError(
            f"multi_loss: expected {spec.p} omega coordinates and losses, "
            f"got {om.size} and {len(per_objective)}")
    total = None
    for w, lam, loss in zip(om, spec.lambdas, per_objective):
        term = T.scale(loss, float(w) * float(lam))
        total = term if total is None else T.add(total, term)
    return total


def build_targets(spec: MultiLossSpec, y, z, omega: np.ndarray,
                  nu: float = NU_DEFAULT, gamma: float = GAMMA_DEFAULT) -> list:
    """Per-objective targets for one training step, driven by the sampled omega.

    The blur target is built on top of the noise target when a noise objective
    is present, matching the joint denoise/deblur construction.
    """
    omega = np.asarray(_data(omega), dtype=np.float64).reshape(-1)
    ids = spec.ids
    if "noise" in ids:
        y_eta = noise_target(y, z, float(omega[ids.index("noise")]), nu)
    else:
        y_eta = Tensor(_data(y))
    targets = []
    for i, obj_id in enumerate(ids):
        if obj_id == "rec":
            targets.append(Tensor(_data(y)))
        elif obj_id == "noise":
            targets.append(y_eta)
        else:
            targets.append(blur_target(y_eta, float(omega[i]), gamma))
    return targets


def psnr(a, b, peak: float = 1.0) -> float:
    """10 log10(peak^2 / MSE) in dB, capped at 100 dB for identical images."""
    ad, bd = _data(a), _data(b)
    if ad.shape != bd.shape:
        raise ShapeError(f"psnr: shapes differ, {ad.shape} vs {bd.shape}")
    if peak <= 0:
        raise DomainError(f"psnr: peak must be positive, got {peak}")
    mse = float(np.mean((ad.astype(np.float64) - bd.astype(np.float64)) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * np.log10(peak * peak / mse))


def psnr_eta(pred, y, z, omega_noise: float, nu: float = NU_DEFAULT,
             peak: float = 1.0) -> float:
    """PSNR against the omega-dependent noise-preservation target."""
    return psnr(pred, noise_target(y, z, omega_noise, nu), peak)
