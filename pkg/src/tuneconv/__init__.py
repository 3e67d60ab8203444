"""Tunable convolutions with a parametric multi-loss, end to end.

A kernel-bank convolution whose aggregation weights come from user-facing
parameters, trained by sampling those parameters uniformly per step and
reusing them to weight the training objectives. Includes the numeric core
(tensors + reverse-mode autodiff), restoration backbones, synthetic data,
training, benchmarking, and an interactive inference service.
"""

from .tensor import Tensor, backward, no_grad
from .conv import conv2d, conv2d_forward, conv2d_reference, gaussian_kernel
from .layers import (KernelBank, Model, ModelConfig, ParamMapper, SEWeightGen,
                     aggregate_bank, build_backbone, dynamic_weights,
                     tunable_weights)
from .objectives import (MultiLossSpec, TuneParams, blur_target, multi_loss,
                         noise_target, psnr, psnr_eta)
from .data import DegradationSpec, degrade, load_image, sample_omega, save_image
from .train import AdamState, TrainConfig, adam_step, train
from .checkpoint import (Checkpoint, interpolate_checkpoints, load_checkpoint,
                         save_checkpoint)

__version__ = "0.1.0"
