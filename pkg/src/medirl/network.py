"""Multi-scale fully convolutional cost-map network with manual backprop.

Two branches read the occupancy grid: the main branch applies 5x5 and
3x3 convolutions at full resolution, the scale branch pools the input
2x, convolves 5x5 and upsamples back. Their feature maps are
concatenated and fused by a 1x1 convolution. Every nonlinearity,
including the output, is a sigmoid, so cost values stay strictly inside
(0, 1). Forward and backward passes are written out explicitly in numpy
(double precision), which keeps gradients exactly checkable against
finite differences.
"""
from __future__ import annotations

import hashlib
import json
import os
import struct
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from .maps import CostMap, OccupancyGrid

MAGIC = b"MEDIRL01"


@dataclass(frozen=True)
class NetConfig:
    """Channel widths of the fixed two-branch architecture."""

    in_channels: int = 3
    main_channels: int = 8
    scale_channels: int = 8

    def layer_shapes(self) -> list[tuple[str, tuple[int, ...], tuple[int, ...]]]:
        """(name, weight shape, bias shape) for every convolution, in order."""
        c_in, cm, cs = self.in_channels, self.main_channels, self.scale_channels
        return [
            ("main5", (cm, c_in, 5, 5), (cm,)),
            ("main3", (cm, cm, 3, 3), (cm,)),
            ("scale5", (cs, c_in, 5, 5), (cs,)),
            ("merge1", (1, cm + cs, 1, 1), (1,)),
        ]

    def hash(self) -> str:
        blob = json.dumps(
            {
                "in_channels": self.in_channels,
                "main_channels": self.main_channels,
                "scale_channels": self.scale_channels,
            },
            sort_keys=True,
        )
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass(frozen=True)
class NetworkParams:
    """All weights and biases, ordered as NetConfig.layer_shapes()."""

    config: NetConfig
    layers: tuple[tuple[np.ndarray, np.ndarray], ...]

    def __post_init__(self) -> None:
        expected = self.config.layer_shapes()
        if len(self.layers) != len(expected):
            raise ValueError("wrong number of layers")
        for (w, b), (name, ws, bs) in zip(self.layers, expected):
            if w.shape != ws or b.shape != bs:
                raise ValueError(f"layer {name}: expected {ws}/{bs}, got {w.shape}/{b.shape}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {name}: non-finite parameters")

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in self.layers)

    def flatten(self) -> np.ndarray:
        return np.concatenate([np.concatenate([w.ravel(), b.ravel()]) for w, b in self.layers])


def unflatten(config: NetConfig, vec: np.ndarray) -> NetworkParams:
    layers = []
    pos = 0
    for _, ws, bs in config.layer_shapes():
        n = int(np.prod(ws))
        w = vec[pos : pos + n].reshape(ws).copy()
        pos += n
        b = vec[pos : pos + bs[0]].copy()
        pos += bs[0]
        layers.append((w, b))
    if pos != vec.size:
        raise ValueError(f"parameter vector has {vec.size} entries, expected {pos}")
    return NetworkParams(config, tuple(layers))


def init_params(seed: int, config: NetConfig = NetConfig()) -> NetworkParams:
    """Uniform(-a, a) weights with a = sqrt(6 / (fan_in + fan_out)); zero biases."""
    rng = np.random.default_rng(seed)
    layers = []
    for _, ws, bs in config.layer_shapes():
        c_out, c_in, k, _ = ws
        a = np.sqrt(6.0 / (c_in * k * k + c_out * k * k))
        layers.append((rng.uniform(-a, a, size=ws), np.zeros(bs)))
    return NetworkParams(config, tuple(layers))


# ---------------------------------------------------------------------------
# layer primitives


def conv2d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """Same-padded 2-D convolution; returns output and the im2col cache."""
    c_out, c_in, k, _ = w.shape
    h, width = x.shape[1:]
    p = k // 2
    xp = np.pad(x, ((0, 0), (p, p), (p, p)))
    win = sliding_window_view(xp, (k, k), axis=(1, 2))  # (c_in, h, w, k, k)
    cols = win.transpose(1, 2, 0, 3, 4).reshape(h * width, c_in * k * k)
    out = cols @ w.reshape(c_out, -1).T + b
    return out.T.reshape(c_out, h, width), (cols, w.shape, (h, width))


def conv2d_backward(grad_out: np.ndarray, cache, w: np.ndarray):
    cols, w_shape, (h, width) = cache
    c_out, c_in, k, _ = w_shape
    p = k // 2
    g = grad_out.reshape(c_out, h * width).T  # (hw, c_out)
    grad_b = grad_out.sum(axis=(1, 2))
    grad_w = (g.T @ cols).reshape(w_shape)
    grad_cols = (g @ w.reshape(c_out, -1)).reshape(h, width, c_in, k, k)
    grad_xp = np.zeros((c_in, h + 2 * p, width + 2 * p))
    for di in range(k):
        for dj in range(k):
            grad_xp[:, di : di + h, dj : dj + width] += grad_cols[:, :, :, di, dj].transpose(2, 0, 1)
    grad_x = grad_xp[:, p : p + h, p : p + width] if p else grad_xp
    return grad_x, grad_w, grad_b


def sigmoid_forward(z: np.ndarray):
    s = expit(z)
    return s, s


def sigmoid_backward(grad_out: np.ndarray, s: np.ndarray) -> np.ndarray:
    return grad_out * s * (1.0 - s)


def maxpool2_forward(x: np.ndarray):
    """2x2 max pooling, stride 2; ties route to the first index in row-major order."""
    c, h, w = x.shape
    if h % 2 or w % 2:
        raise ValueError(f"pooling needs even dimensions, got {h}x{w}")
    blocks = x.reshape(c, h // 2, 2, w // 2, 2).transpose(0, 1, 3, 2, 4).reshape(c, h // 2, w // 2, 4)
    idx = blocks.argmax(axis=3)
    out = np.take_along_axis(blocks, idx[..., None], axis=3)[..., 0]
    return out, (idx, x.shape)


def maxpool2_backward(grad_out: np.ndarray, cache) -> np.ndarray:
    idx, (c, h, w) = cache
    grad_blocks = np.zeros((c, h // 2, w // 2, 4))
    np.put_along_axis(grad_blocks, idx[..., None], grad_out[..., None], axis=3)
    return grad_blocks.reshape(c, h // 2, w // 2, 2, 2).transpose(0, 1, 3, 2, 4).reshape(c, h, w)


def upsample2_forward(x: np.ndarray) -> np.ndarray:
    return np.repeat(np.repeat(x, 2, axis=1), 2, axis=2)


def upsample2_backward(grad_out: np.ndarray) -> np.ndarray:
    c, h2, w2 = grad_out.shape
    return grad_out.reshape(c, h2 // 2, 2, w2 // 2, 2).sum(axis=(2, 4))


# ---------------------------------------------------------------------------
# full network


def forward(params: NetworkParams, grid: OccupancyGrid):
    """Map an occupancy grid to a cost map; the tape enables exact backward."""
    x = grid.channels
    cfg = params.config
    if x.shape[0] != cfg.in_channels:
        raise ValueError(f"expected {cfg.in_channels} input channels, got {x.shape[0]}")
    h, w = x.shape[1:]
    if h % 2 or w % 2:
        raise ValueError(f"grid dimensions must be even, got {h}x{w}")
    (w1, b1), (w2, b2), (ws, bs), (wm, bm) = params.layers

    z1, c1 = conv2d_forward(x, w1, b1)
    a1, s1 = sigmoid_forward(z1)
    z2, c2 = conv2d_forward(a1, w2, b2)
    a2, s2 = sigmoid_forward(z2)

    pooled, cp = maxpool2_forward(x)
    z3, c3 = conv2d_forward(pooled, ws, bs)
    a3, s3 = sigmoid_forward(z3)
    up = upsample2_forward(a3)

    merged = np.concatenate([a2, up], axis=0)
    z4, c4 = conv2d_forward(merged, wm, bm)
    out, s4 = sigmoid_forward(z4)

    tape = {
        "params": params,
        "conv": (c1, c2, c3, c4),
        "sig": (s1, s2, s3, s4),
        "pool": cp,
        "split": a2.shape[0],
        "shape": (h, w),
    }
    return CostMap(out[0]), tape


def backward(tape, grad_out: np.ndarray):
    """Exact reverse-mode gradients for parameters and the input grid."""
    params: NetworkParams = tape["params"]
    (w1, _), (w2, _), (ws, _), (wm, _) = params.layers
    c1, c2, c3, c4 = tape["conv"]
    s1, s2, s3, s4 = tape["sig"]
    h, w = tape["shape"]
    if grad_out.shape != (h, w):
        raise ValueError(f"grad shape {grad_out.shape} does not match output {(h, w)}")

    g = sigmoid_backward(grad_out[None, :, :], s4)
    g_merged, gw4, gb4 = conv2d_backward(g, c4, wm)
    split = tape["split"]
    g_a2, g_up = g_merged[:split], g_merged[split:]

    g_a3 = upsample2_backward(g_up)
    g_z3 = sigmoid_backward(g_a3, s3)
    g_pooled, gw3, gb3 = conv2d_backward(g_z3, c3, ws)
    g_x_scale = maxpool2_backward(g_pooled, tape["pool"])

    g_z2 = sigmoid_backward(g_a2, s2)
    g_a1, gw2, gb2 = conv2d_backward(g_z2, c2, w2)
    g_z1 = sigmoid_backward(g_a1, s1)
    g_x_main, gw1, gb1 = conv2d_backward(g_z1, c1, w1)

    grad_params = NetworkParams(
        params.config, ((gw1, gb1), (gw2, gb2), (gw3, gb3), (gw4, gb4))
    )
    return grad_params, g_x_main + g_x_scale


def regression_loss_and_grad(params: NetworkParams, grid: OccupancyGrid, target: CostMap):
    """Mean squared error against a target cost map, with parameter gradients."""
    t = target.values
    out, tape = forward(params, grid)
    if t.shape != out.values.shape:
        raise ValueError(f"target shape {t.shape} does not match output {out.values.shape}")
    if np.any(t < 0) or np.any(t > 1):
        raise ValueError("regression target must lie in [0, 1]")
    diff = out.values - t
    loss = float(np.mean(diff**2))
    grad_params, _ = backward(tape, 2.0 * diff / diff.size)
    return loss, grad_params


def add_params(a: NetworkParams, b: NetworkParams, scale: float = 1.0) -> NetworkParams:
    """a + scale * b, layerwise."""
    layers = tuple(
        (wa + scale * wb, ba + scale * bb)
        for (wa, ba), (wb, bb) in zip(a.layers, b.layers)
    )
    return NetworkParams(a.config, layers)


# ---------------------------------------------------------------------------
# checkpoints


def save_params(params: NetworkParams, path) -> None:
    """Versioned binary checkpoint: JSON header + row-major float64 payload."""
    cfg = params.config
    header = json.dumps(
        {
            "config": {
                "in_channels": cfg.in_channels,
                "main_channels": cfg.main_channels,
                "scale_channels": cfg.scale_channels,
            },
            "config_hash": cfg.hash(),
            "layer_shapes": [
                [list(ws), list(bs)] for _, ws, bs in cfg.layer_shapes()
            ],
        },
        sort_keys=True,
    ).encode("ascii")
    payload = params.flatten().astype("<f8").tobytes()
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(payload)
    os.replace(tmp, path)  # interrupted writes never leave a torn checkpoint


def load_params(path) -> NetworkParams:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:8] != MAGIC:
        raise ValueError(f"{path}: not a medirl checkpoint")
    (hlen,) = struct.unpack("<I", blob[8:12])
    header = json.loads(blob[12 : 12 + hlen].decode("ascii"))
    cfg = NetConfig(**header["config"])
    if header["config_hash"] != cfg.hash():
        raise ValueError(f"{path}: config hash mismatch")
    vec = np.frombuffer(blob[12 + hlen :], dtype="<f8").astype(np.float64)
    return unflatten(cfg, vec)
