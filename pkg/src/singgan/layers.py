"""Differentiable building blocks and the gradient-check contract.

Reverse-mode gradients come from torch autograd; :func:`grad_check` verifies
them against central finite differences in float64.
"""

from __future__ import annotations

import math
from typing import Callable, Mapping

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F


class ShapeError(ValueError):
    pass


class GradCheckError(RuntimeError):
    pass


def conv1d(x, weight, bias=None, dilation: int = 1, stride: int = 1):
    """Dilated cross-correlation; stride 1 keeps the time length ("same")."""
    if x.dim() != 3 or weight.dim() != 3:
        raise ShapeError(f"expected (B, C, T) input and (O, C, k) weight, got {tuple(x.shape)}, {tuple(weight.shape)}")
    if x.shape[1] != weight.shape[1]:
        raise ShapeError(f"input has {x.shape[1]} channels, weight expects {weight.shape[1]}")
    k = weight.shape[-1]
    span = dilation * (k - 1)
    if stride == 1:
        if span % 2:
            raise ShapeError("same padding needs an even dilation * (kernel - 1)")
        padding = span // 2
    else:
        padding = (span + 1 - stride) // 2 if span + 1 > stride else 0
    return F.conv1d(x, weight, bias, stride=stride, padding=padding, dilation=dilation)


def transpose_padding(stride: int) -> int:
    if stride < 2 or stride % 2:
        raise ShapeError("transposed convolution stride must be even (kernel = 2 * stride)")
    return stride // 2


def conv_transpose1d(x, weight, bias=None, stride: int = 2):
    """Fractionally-strided convolution with kernel ``2 * stride``; length grows by ``stride``.

    ``weight`` has shape ``(C_in, C_out, 2 * stride)``.
    """
    if x.dim() != 3 or weight.dim() != 3 or x.shape[1] != weight.shape[0]:
        raise ShapeError(f"incompatible shapes {tuple(x.shape)} and {tuple(weight.shape)}")
    if weight.shape[-1] != 2 * stride:
        raise ShapeError(f"kernel must be 2 * stride = {2 * stride}, got {weight.shape[-1]}")
    return F.conv_transpose1d(x, weight, bias, stride=stride, padding=transpose_padding(stride))


def gau(features, condition):
    """WaveNet gate ``tanh(a + c_a) * sigmoid(b + c_b)``; both inputs carry ``2C`` channels."""
    if features.shape[1] % 2:
        raise ShapeError("gated activation needs an even channel count")
    if condition.shape != features.shape:
        raise ShapeError(f"condition shape {tuple(condition.shape)} != features {tuple(features.shape)}")
    z = features + condition
    a, b = z.chunk(2, dim=1)
    return torch.tanh(a) * torch.sigmoid(b)


def leaky_relu(x, slope: float = 0.2):
    return F.leaky_relu(x, slope)


# ------------------------------------------------------------- modules -----


class Conv1d(nn.Module):
    def __init__(self, in_channels: int, out_channels: int, kernel: int = 1, dilation: int = 1, bias: bool = True):
        super().__init__()
        self.dilation = dilation
        self.weight = nn.Parameter(torch.empty(out_channels, in_channels, kernel))
        self.bias = nn.Parameter(torch.zeros(out_channels)) if bias else None

    def forward(self, x):
        return conv1d(x, self.weight, self.bias, self.dilation)


class ConvTranspose1d(nn.Module):
    def __init__(self, in_channels: int, out_channels: int, stride: int):
        super().__init__()
        self.stride = stride
        self.weight = nn.Parameter(torch.empty(in_channels, out_channels, 2 * stride))
        self.bias = nn.Parameter(torch.zeros(out_channels))

    def forward(self, x):
        return conv_transpose1d(x, self.weight, self.bias, self.stride)


def init_parameters(module: nn.Module, seed: int) -> None:
    """Seeded Kaiming-uniform (fan-in, unit gain) weights and zero biases.

    Parameters are visited in name order, so the result depends only on
    ``seed`` and the architecture.
    """
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for name, p in sorted(module.named_parameters()):
            if name.endswith("bias") or p.dim() < 2:
                p.zero_()
                continue
            owner = module.get_submodule(name.rsplit(".", 1)[0]) if "." in name else module
            if isinstance(owner, ConvTranspose1d):
                fan_in = p.shape[0] * p.shape[2] // owner.stride
            else:
                fan_in = p.shape[1] * p.shape[2]
            bound = math.sqrt(3.0 / fan_in)
            p.copy_(torch.rand(p.shape, generator=gen, dtype=torch.float64).mul_(2 * bound).sub_(bound).to(p.dtype))


def param_store(module: nn.Module) -> dict[str, np.ndarray]:
    return {name: p.detach().cpu().numpy().copy() for name, p in module.named_parameters()}


def count_parameters(params) -> int:
    """Total element count of a module or a ``name -> array`` mapping."""
    if isinstance(params, nn.Module):
        return sum(p.numel() for p in params.parameters())
    return int(sum(int(np.prod(np.shape(v))) for v in params.values()))


# --------------------------------------------------------- grad check -----


def grad_check(
    fn: Callable[[dict[str, torch.Tensor]], torch.Tensor],
    tensors: Mapping[str, torch.Tensor],
    eps: float = 1e-5,
    num_coords: int = 64,
    seed: int = 0,
    rel_floor: float = 1e-3,
) -> float:
    """Compare autograd against central differences; return the max relative error.

    ``fn`` maps a dict of float64 tensors to a tensor output, which is reduced
    to a scalar by a fixed random projection so every output element matters.
    ``num_coords`` input coordinates are sampled across all tensors. The error
    at one coordinate is ``|g_ad - g_fd| / max(|g_ad|, |g_fd|, f)`` where the
    floor ``f = rel_floor * max |g_ad|`` keeps coordinates with near-zero
    gradient from dominating. The default step is small enough that a probe
    rarely straddles a leaky-relu kink in a deep stack while float64 round-off
    stays far below the tolerance.
    """
    rng = np.random.default_rng(seed)
    base = {k: v.detach().to(torch.float64).clone() for k, v in tensors.items()}
    names = list(base)
    out = fn({k: v for k, v in base.items()})
    _check_finite(out, "forward output")
    proj = torch.from_numpy(rng.standard_normal(tuple(out.shape)))

    def scalar(inputs):
        y = fn(inputs)
        _check_finite(y, "forward output")
        return (y * proj).sum()

    leaves = {k: v.clone().requires_grad_(True) for k, v in base.items()}
    s = scalar(leaves)
    grads = torch.autograd.grad(s, [leaves[k] for k in names], allow_unused=True)
    grads = {k: (torch.zeros_like(base[k]) if g is None else g) for k, g in zip(names, grads)}
    for k, g in grads.items():
        _check_finite(g, f"gradient of {k!r}")

    sizes = np.array([base[k].numel() for k in names])
    total = int(sizes.sum())
    if total == 0:
        raise GradCheckError("no input coordinates to probe")
    picks = rng.choice(total, size=min(num_coords, total), replace=False)
    offsets = np.concatenate([[0], np.cumsum(sizes)])

    ad, fd = [], []
    with torch.no_grad():
        for flat in picks:
            t = int(np.searchsorted(offsets, flat, side="right") - 1)
            name, idx = names[t], int(flat - offsets[t])
            probe = {k: v.clone() for k, v in base.items()}
            view = probe[name].view(-1)
            orig = view[idx].item()
            view[idx] = orig + eps
            f_plus = scalar(probe).item()
            view[idx] = orig - eps
            f_minus = scalar(probe).item()
            if not (math.isfinite(f_plus) and math.isfinite(f_minus)):
                raise GradCheckError(f"non-finite loss when perturbing {name}[{idx}]")
            fd.append((f_plus - f_minus) / (2 * eps))
            ad.append(grads[name].view(-1)[idx].item())
    ad_arr, fd_arr = np.array(ad), np.array(fd)
    floor = max(rel_floor * float(np.abs(ad_arr).max()), 1e-300)
    denom = np.maximum(np.maximum(np.abs(ad_arr), np.abs(fd_arr)), floor)
    return float(np.max(np.abs(ad_arr - fd_arr) / denom))


def _check_finite(t: torch.Tensor, where: str) -> None:
    if not torch.isfinite(t).all():
        bad = torch.nonzero(~torch.isfinite(t))[0].tolist()
        raise GradCheckError(f"non-finite value in {where} at index {bad}")
