"""2-d convolution kernels: direct-loop reference, im2col fast path, filters.

The direct implementation is the correctness reference; the im2col path is the
default and must agree with it to 1e-5 (property-tested). Both operate on
NCHW row-major arrays.
"""

from __future__ import annotations

import numpy as np

from .tensor import DomainError, ShapeError, Tensor, _result, _accum


def _check_conv_shapes(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray,
                       stride: int, padding: int):
    if x.ndim != 4:
        raise ShapeError(f"conv2d: input must be 4-d (n,c,h,w), got {x.shape}")
    if kernel.ndim != 4:
        raise ShapeError(f"conv2d: kernel must be 4-d (d,c,k,k), got {kernel.shape}")
    d, c, kh, kw = kernel.shape
    if kh != kw:
        raise ShapeError(f"conv2d: kernel must be square, got {kh}x{kw}")
    if kh % 2 != 1:
        raise ShapeError(f"conv2d: kernel size must be odd, got {kh}")
    if x.shape[1] != c:
        raise ShapeError(
            f"conv2d: axis 1 (channels) mismatch, input has {x.shape[1]}, "
            f"kernel expects {c}")
    if bias.shape != (d,):
        raise ShapeError(
            f"conv2d: bias shape {bias.shape} does not match {d} output channels")
    if stride < 1:
        raise DomainError(f"conv2d: stride must be positive, got {stride}")
    if padding < 0:
        raise DomainError(f"conv2d: padding must be nonnegative, got {padding}")
    n, _, h, w = x.shape
    if (h + 2 * padding - kh) % stride or (w + 2 * padding - kw) % stride:
        raise ShapeError(
            f"conv2d: output extent is not integral for input {h}x{w}, "
            f"kernel {kh}, stride {stride}, padding {padding}")
    oh = (h + 2 * padding - kh) // stride + 1
    ow = (w + 2 * padding - kw) // stride + 1
    if oh < 1 or ow < 1:
        raise ShapeError(f"conv2d: empty output ({oh}x{ow})")
    return oh, ow


def conv2d_reference(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray,
                     stride: int = 1, padding: int = 0) -> np.ndarray:
    """Direct quadruple-loop convolution with zero padding. Slow; the oracle."""
    oh, ow = _check_conv_shapes(x, kernel, bias, stride, padding)
    n, c, h, w = x.shape
    d, _, k, _ = kernel.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    out = np.zeros((n, d, oh, ow), dtype=x.dtype)
    for b in range(n):
        for o in range(d):
            for i in range(oh):
                for j in range(ow):
                    acc = bias[o]
                    for cc in range(c):
                        for u in range(k):
                            for v in range(k):
                                acc += (xp[b, cc, i * stride + u, j * stride + v]
                                        * kernel[o, cc, u, v])
                    out[b, o, i, j] = acc
    return out


def _im2col(xp: np.ndarray, k: int, stride: int, oh: int, ow: int) -> np.ndarray:
    """(n, c, hp, wp) padded input -> (n, oh*ow, c*k*k) patch matrix."""
    n, c, hp, wp = xp.shape
    sn, sc, sh, sw = xp.strides
    windows = np.lib.stride_tricks.as_strided(
        xp, shape=(n, c, oh, ow, k, k),
        strides=(sn, sc, sh * stride, sw * stride, sh, sw))
    # (n, oh, ow, c, k, k) -> rows indexed by output pixel
    return np.ascontiguousarray(windows.transpose(0, 2, 3, 1, 4, 5)).reshape(
        n, oh * ow, c * k * k)


def conv2d_forward(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray,
                   stride: int = 1, padding: int = 0) -> np.ndarray:
    """im2col + matmul convolution; matches conv2d_reference within 1e-5."""
    oh, ow = _check_conv_shapes(x, kernel, bias, stride, padding)
    n, c, h, w = x.shape
    d, _, k, _ = kernel.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    cols = _im2col(xp, k, stride, oh, ow)
    out = cols @ kernel.reshape(d, c * k * k).T + bias
    return out.transpose(0, 2, 1).reshape(n, d, oh, ow)


def conv2d_backward(x: np.ndarray, kernel: np.ndarray, gout: np.ndarray,
                    stride: int, padding: int, cols: np.ndarray = None):
    """Gradients of conv2d w.r.t. (input, kernel, bias) given d(loss)/d(output).

    Passing the forward pass's im2col patch matrix avoids recomputing it.
    """
    n, c, h, w = x.shape
    d, _, k, _ = kernel.shape
    _, _, oh, ow = gout.shape
    xp_shape = (n, c, h + 2 * padding, w + 2 * padding)
    if cols is None:
        xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
        cols = _im2col(xp, k, stride, oh, ow)
    g2 = gout.reshape(n, d, oh * ow).transpose(0, 2, 1)  # (n, oh*ow, d)

    gkernel = np.tensordot(g2, cols, axes=([0, 1], [0, 1])).reshape(kernel.shape)
    gbias = gout.sum(axis=(0, 2, 3))

    gcols = g2 @ kernel.reshape(d, c * k * k)  # (n, oh*ow, c*k*k)
    gcols = gcols.reshape(n, oh, ow, c, k, k).transpose(0, 3, 4, 5, 1, 2)
    gxp = np.zeros(xp_shape, dtype=x.dtype)
    for u in range(k):
        for v in range(k):
            gxp[:, :, u:u + stride * oh:stride, v:v + stride * ow:stride] += \
                gcols[:, :, u, v]
    if padding:
        gx = gxp[:, :, padding:-padding, padding:-padding]
    else:
        gx = gxp
    return gx, gkernel, gbias


def conv2d(x: Tensor, kernel: Tensor, bias: Tensor, stride: int = 1,
           padding: int = 0, method: str = "im2col") -> Tensor:
    """Differentiable convolution. method 'im2col' (default) or 'reference'."""
    cols = None
    if method == "reference":
        y = conv2d_reference(x.data, kernel.data, bias.data, stride, padding)
    elif method == "im2col":
        oh, ow = _check_conv_shapes(x.data, kernel.data, bias.data, stride, padding)
        n, c, _, _ = x.shape
        d, _, k, _ = kernel.shape
        xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding),
                             (padding, padding)))
        cols = _im2col(xp, k, stride, oh, ow)
        y = (cols @ kernel.data.reshape(d, c * k * k).T + bias.data) \
            .transpose(0, 2, 1).reshape(n, d, oh, ow)
    else:
        raise DomainError(f"conv2d: unknown method {method!r}")

    def bw(g):
        gx, gk, gb = conv2d_backward(x.data, kernel.data, g, stride, padding,
                                     cols=cols)
        _accum(x, gx)
        _accum(kernel, gk)
        _accum(bias, gb)

    return _result(y, (x, kernel, bias), bw)


def gaussian_kernel(size: int, sigma: float) -> Tensor:
    """Normalized 2-d Gaussian on the integer grid, shape (1, 1, size, size)."""
    if size % 2 != 1 or size < 1:
        raise DomainError(f"gaussian_kernel: size must be odd and positive, got {size}")
    if sigma <= 0:
        raise DomainError(f"gaussian_kernel: sigma must be positive, got {sigma}")
    half = size // 2
    u = np.arange(-half, half + 1, dtype=np.float64)
    g1 = np.exp(-(u ** 2) / (2.0 * sigma ** 2))
    g2 = np.outer(g1, g1)
    g2 /= g2.sum()
    return Tensor(g2.reshape(1, 1, size, size).astype(np.float32))


def filter2d_reflect(x: np.ndarray, kernel2d: np.ndarray) -> np.ndarray:
    """Per-channel filtering with reflect padding; constant images are fixed
    points of any kernel that sums to 1. Non-differentiable (target building)."""
    if x.ndim != 4:
        raise ShapeError(f"filter2d_reflect: input must be 4-d, got {x.shape}")
    k = kernel2d.shape[-1]
    kern = np.asarray(kernel2d, dtype=x.dtype).reshape(k, k)
    half = k // 2
    n, c, h, w = x.shape
    if half:
        xp = np.pad(x, ((0, 0), (0, 0), (half, half), (half, half)), mode="reflect")
    else:
        xp = x
    flat = xp.reshape(n * c, 1, xp.shape[2], xp.shape[3])
    bias = np.zeros(1, dtype=x.dtype)
    out = conv2d_forward(flat, kern.reshape(1, 1, k, k), bias)
    return out.reshape(n, c, h, w)
