"""Convolution variants and backbone assembly.

Three interchangeable layer flavors over a shared kernel bank:

- traditional: one fixed kernel/bias (p = 1 degenerate case)
- dynamic: aggregation weights generated from the input by a small SE head,
  softmax-normalized so they are convex
- tunable: aggregation weights are an activation-free affine map of the
  user-facing parameters, shared across every layer of a forward pass
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from . import tensor as T
from .conv import conv2d
from .tensor import ShapeError, Tensor

VARIANTS = ("traditional", "dynamic", "tunable")


class ConfigError(ValueError):
    """Invalid model configuration; message lists every violation."""


@dataclass
class ModelConfig:
    blocks: int = 16
    channels: int = 64
    kernel_size: int = 3
    p: int = 1
    variant: str = "tunable"
    long_skip: bool = True
    in_channels: int = 3
    share_mapper: bool = False

    def validate(self):
        problems = []
        if self.blocks < 1:
            problems.append(f"blocks must be >= 1 (got {self.blocks})")
        if self.channels < 1:
            problems.append(f"channels must be >= 1 (got {self.channels})")
        if self.kernel_size < 1 or self.kernel_size % 2 != 1:
            problems.append(f"kernel_size must be odd and positive (got {self.kernel_size})")
        if self.p < 1:
            problems.append(f"p must be >= 1 (got {self.p})")
        if self.variant not in VARIANTS:
            problems.append(f"variant must be one of {VARIANTS} (got {self.variant!r})")
        if self.in_channels < 1:
            problems.append(f"in_channels must be >= 1 (got {self.in_channels})")
        if problems:
            raise ConfigError("; ".join(problems))

    def to_dict(self) -> dict:
        return {
            "blocks": self.blocks, "channels": self.channels,
            "kernel_size": self.kernel_size, "p": self.p,
            "variant": self.variant, "long_skip": self.long_skip,
            "in_channels": self.in_channels, "share_mapper": self.share_mapper,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        cfg = cls(**d)
        cfg.validate()
        return cfg


@dataclass
class KernelBank:
    """p stacked kernels (p, d, c, k, k) and biases (p, d) behind one conv."""
    kernels: Tensor
    biases: Tensor

    @property
    def p(self) -> int:
        return self.kernels.shape[0]


@dataclass
class ParamMapper:
    """Activation-free affine map from the p interactive parameters to the
    p aggregation weights."""
    weight: Tensor  # (p, p)
    bias: Tensor    # (p,)


@dataclass
class SEWeightGen:
    """Squeeze-and-excitation head: pooled features -> softmax weights."""
    reduce_w: Tensor   # (r, c)
    reduce_b: Tensor   # (r,)
    expand_w: Tensor   # (p, r)
    expand_b: Tensor   # (p,)


def aggregate_bank(bank: KernelBank, alpha: Tensor):
    """Linear combination of the bank: k_hat = sum a_i k_i, b_hat = sum a_i b_i."""
    if alpha.shape != (bank.p,):
        raise ShapeError(
            f"aggregate_bank: expected {bank.p} weights, got shape {alpha.shape}")
    return T.weighted_sum(alpha, bank.kernels), T.weighted_sum(alpha, bank.biases)


def tunable_weights(mapper: ParamMapper, omega: Tensor) -> Tensor:
    """alpha = W @ omega + b; deliberately unconstrained (no activation)."""
    return T.affine(omega, mapper.weight, mapper.bias)


def dynamic_weights(gen: SEWeightGen, x: Tensor) -> Tensor:
    """Per-batch-item convex aggregation weights, shape (n, p)."""
    if x.shape[1] != gen.reduce_w.shape[1]:
        raise ShapeError(
            f"dynamic_weights: input has {x.shape[1]} channels, "
            f"SE head expects {gen.reduce_w.shape[1]}")
    pooled = T.reshape(T.global_avg_pool(x), (x.shape[0], x.shape[1]))
    hidden = T.relu(T.affine(pooled, gen.reduce_w, gen.reduce_b))
    return T.softmax(T.affine(hidden, gen.expand_w, gen.expand_b))


class TraditionalConv:
    def __init__(self, kernel: Tensor, bias: Tensor, stride: int = 1,
                 padding: int = 0):
        self.kernel = kernel
        self.bias = bias
        self.stride = stride
        self.padding = padding

    def forward(self, x: Tensor, omega: Optional[Tensor] = None) -> Tensor:
        return conv2d(x, self.kernel, self.bias, self.stride, self.padding)

    def named_params(self, prefix: str):
        yield f"{prefix}.kernel", self.kernel
        yield f"{prefix}.bias", self.bias


class TunableConv:
    def __init__(self, bank: KernelBank, mapper: ParamMapper, stride: int = 1,
                 padding: int = 0):
        self.bank = bank
        self.mapper = mapper
        self.stride = stride
        self.padding = padding

    def forward(self, x: Tensor, omega: Tensor) -> Tensor:
        alpha = tunable_weights(self.mapper, omega)
        kernel, bias = aggregate_bank(self.bank, alpha)
        return conv2d(x, kernel, bias, self.stride, self.padding)

    def named_params(self, prefix: str):
        yield f"{prefix}.kernels", self.bank.kernels
        yield f"{prefix}.biases", self.bank.biases
        yield f"{prefix}.mapper_w", self.mapper.weight
        yield f"{prefix}.mapper_b", self.mapper.bias


class DynamicConv:
    def __init__(self, bank: KernelBank, gen: SEWeightGen, stride: int = 1,
                 padding: int = 0):
        self.bank = bank
        self.gen = gen
        self.stride = stride
        self.padding = padding

    def forward(self, x: Tensor, omega: Optional[Tensor] = None) -> Tensor:
        alpha = dynamic_weights(self.gen, x)
        outs = []
        for i in range(x.shape[0]):
            kernel, bias = aggregate_bank(self.bank, T.reshape(
                T.take0(alpha, i), (self.bank.p,)))
            outs.append(conv2d(T.take0(x, i), kernel, bias,
                               self.stride, self.padding))
        return outs[0] if len(outs) == 1 else T.concat0(outs)

    def named_params(self, prefix: str):
        yield f"{prefix}.kernels", self.bank.kernels
        yield f"{prefix}.biases", self.bank.biases
        yield f"{prefix}.se_reduce_w", self.gen.reduce_w
        yield f"{prefix}.se_reduce_b", self.gen.reduce_b
        yield f"{prefix}.se_expand_w", self.gen.expand_w
        yield f"{prefix}.se_expand_b", self.gen.expand_b


class ResidualBlock:
    """x + conv2(relu(conv1(x))), both convs of the configured variant."""

    def __init__(self, conv1, conv2):
        self.conv1 = conv1
        self.conv2 = conv2

    def forward(self, x: Tensor, omega: Optional[Tensor] = None) -> Tensor:
        h = T.relu(self.conv1.forward(x, omega))
        return T.add(x, self.conv2.forward(h, omega))

    def named_params(self, prefix: str):
        yield from self.conv1.named_params(f"{prefix}.conv1")
        yield from self.conv2.named_params(f"{prefix}.conv2")


class Model:
    """Head conv -> residual blocks -> tail conv, with an optional long skip
    from the post-head feature to the pre-tail feature."""

    def __init__(self, config: ModelConfig, head, blocks, tail):
        self.config = config
        self.head = head
        self.blocks = blocks
        self.tail = tail

    def forward(self, x: Tensor, omega: Optional[Tensor] = None) -> Tensor:
        if self.config.variant == "tunable":
            if omega is None:
                raise ShapeError("tunable model requires omega")
            if omega.shape != (self.config.p,):
                raise ShapeError(
                    f"omega has shape {omega.shape}, model expects ({self.config.p},)")
        f0 = self.head.forward(x, omega)
        f = f0
        for block in self.blocks:
            f = block.forward(f, omega)
        if self.config.long_skip:
            f = T.add(f, f0)
        return self.tail.forward(f, omega)

    def named_params(self) -> Iterator[tuple[str, Tensor]]:
        yield from self.head.named_params("head")
        for i, block in enumerate(self.blocks):
            yield from block.named_params(f"block{i}")
        yield from self.tail.named_params("tail")

    def params(self) -> list[Tensor]:
        return [t for _, t in self.named_params()]

    def param_count(self) -> int:
        return sum(t.data.size for t in self.params())


def _init_bank(rng: np.random.Generator, p: int, d: int, c: int, k: int) -> KernelBank:
    # All p slots start as copies of one draw. With the identity mapper this
    # makes the initial model invariant to omega on the simplex (the weights
    # sum to 1 and scale a single shared kernel), so omega-sensitivity only
    # develops where the objectives ask for it. Independently drawn slots
    # start with a random omega response that short training schedules never
    # fully recalibrate, which shows up as a PSNR dip at the omega corners.
    limit = float(np.sqrt(1.0 / (c * k * k)))
    base = rng.uniform(-limit, limit, size=(1, d, c, k, k))
    kernels = np.repeat(base, p, axis=0).astype(np.float32)
    biases = np.zeros((p, d), dtype=np.float32)
    return KernelBank(Tensor(kernels, requires_grad=True),
                      Tensor(biases, requires_grad=True))


def _init_mapper(p: int) -> ParamMapper:
    # identity start: alpha == omega at step 0
    return ParamMapper(Tensor(np.eye(p, dtype=np.float32), requires_grad=True),
                       Tensor(np.zeros(p, dtype=np.float32), requires_grad=True))


def _init_se(rng: np.random.Generator, c: int, p: int) -> SEWeightGen:
    r = max(4, c // 16)
    lim1 = float(np.sqrt(1.0 / c))
    lim2 = float(np.sqrt(1.0 / r))
    return SEWeightGen(
        Tensor(rng.uniform(-lim1, lim1, size=(r, c)).astype(np.float32),
               requires_grad=True),
        Tensor(np.zeros(r, dtype=np.float32), requires_grad=True),
        Tensor(rng.uniform(-lim2, lim2, size=(p, r)).astype(np.float32),
               requires_grad=True),
        Tensor(np.zeros(p, dtype=np.float32), requires_grad=True),
    )


def _make_conv(config: ModelConfig, rng: np.random.Generator, c_in: int,
               c_out: int, shared_mapper: Optional[ParamMapper]):
    k = config.kernel_size
    pad = k // 2
    if config.variant == "traditional":
        bank = _init_bank(rng, 1, c_out, c_in, k)
        kernel = Tensor(bank.kernels.data[0].copy(), requires_grad=True)
        bias = Tensor(np.zeros(c_out, dtype=np.float32), requires_grad=True)
        return TraditionalConv(kernel, bias, padding=pad)
    if config.variant == "tunable":
        bank = _init_bank(rng, config.p, c_out, c_in, k)
        mapper = shared_mapper if shared_mapper is not None else _init_mapper(config.p)
        return TunableConv(bank, mapper, padding=pad)
    bank = _init_bank(rng, config.p, c_out, c_in, k)
    return DynamicConv(bank, _init_se(rng, c_in, config.p), padding=pad)


def build_backbone(config: ModelConfig, seed: int = 0) -> Model:
    """Deterministically initialized restoration backbone."""
    config.validate()
    rng = np.random.default_rng(seed)
    shared = _init_mapper(config.p) if (config.variant == "tunable"
                                        and config.share_mapper) else None
    head = _make_conv(config, rng, config.in_channels, config.channels, shared)
    blocks = []
    for _ in range(config.blocks):
        blocks.append(ResidualBlock(
            _make_conv(config, rng, config.channels, config.channels, shared),
            _make_conv(config, rng, config.channels, config.channels, shared)))
    tail = _make_conv(config, rng, config.channels, config.in_channels, shared)
    return Model(config, head, blocks, tail)
