"""Tri-branch multi-modal classifier trained with BCE and self-distillation.

Two single-layer encoders feed a fused trunk (concat -> affine -> relu) with
a sigmoid main head; two auxiliary sigmoid heads read each encoder output
directly.  The auxiliary heads are detached: their losses never produce
gradients for the encoders, the fusion block, or the main head, so the main
model trains exactly as if the branches did not exist.

Gradients are exact and hand-derived; the optimizer is Adamax (infinity-norm
Adam variant) or plain SGD.  Everything is float64 numpy and fully
deterministic given the seeds.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator, Sequence

import numpy as np

__all__ = [
    "Activations",
    "EmptyLabeledSet",
    "Layer",
    "ModelConfig",
    "OptimizerState",
    "Parameters",
    "ShapeMismatch",
    "TrainConfig",
    "backward",
    "forward",
    "forward_batch",
    "init_model",
    "load_parameters",
    "loss_branch",
    "loss_main",
    "optimizer_step",
    "save_parameters",
    "train",
]

LOG_EPS = 1e-12  # clamp inside BCE logs; guards hard 0/1 sigmoid saturation

# Parameter-group names, in initialization and serialization order.  The
# main group comes first so that removing the auxiliary heads does not
# perturb the random draws of the main model.
MAIN_GROUP = ("enc_v", "enc_q", "fusion", "head_main")
BRANCH_GROUP = ("head_v", "head_q")
GROUP_ORDER = MAIN_GROUP + BRANCH_GROUP

CHECKPOINT_MAGIC = b"TRIBRANCH-PARAMS-V1\n"


class ShapeMismatch(ValueError):
    """Input width does not match the model configuration."""


class EmptyLabeledSet(ValueError):
    """Training was requested on an empty labeled set."""


@dataclass(frozen=True)
class ModelConfig:
    dim_v: int = 16
    dim_q: int = 16
    hidden: int = 64
    num_classes: int = 10
    distill_weight: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if min(self.dim_v, self.dim_q, self.hidden) < 1:
            raise ValueError("all dims >= 1")
        if self.num_classes < 2:
            raise ValueError("num_classes >= 2")
        if self.distill_weight < 0.0:
            raise ValueError("distill_weight >= 0")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.002
    max_epoch: int = 30
    batch_size: int = 50
    optimizer: str = "adamax"
    adamax_betas: tuple[float, float] = (0.9, 0.999)
    adamax_eps: float = 1e-8

    def __post_init__(self):
        if self.learning_rate < 0.0:
            raise ValueError("learning_rate >= 0")
        if self.max_epoch < 1:
            raise ValueError("max_epoch >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size >= 1")
        if self.optimizer not in ("adamax", "sgd"):
            raise ValueError("optimizer is 'adamax' or 'sgd'")


@dataclass
class Layer:
    """One affine map: weight of shape (out, in) plus bias of shape (out,)."""

    w: np.ndarray
    b: np.ndarray

    def copy(self) -> "Layer":
        return Layer(self.w.copy(), self.b.copy())


@dataclass
class Parameters:
    """All six affine blocks of the tri-branch model.

    The same container doubles as a gradient holder, since gradients share
    the parameter shapes.
    """

    enc_v: Layer
    enc_q: Layer
    fusion: Layer
    head_main: Layer
    head_v: Layer
    head_q: Layer

    def layers(self) -> Iterator[tuple[str, Layer]]:
        for name in GROUP_ORDER:
            yield name, getattr(self, name)

    def named_arrays(self) -> Iterator[tuple[str, np.ndarray]]:
        for name, layer in self.layers():
            yield f"{name}.w", layer.w
            yield f"{name}.b", layer.b

    def copy(self) -> "Parameters":
        return Parameters(**{name: layer.copy() for name, layer in self.layers()})


def _layer_shapes(cfg: ModelConfig) -> dict[str, tuple[int, int]]:
    h, k = cfg.hidden, cfg.num_classes
    return {
        "enc_v": (h, cfg.dim_v),
        "enc_q": (h, cfg.dim_q),
        "fusion": (h, 2 * h),
        "head_main": (k, h),
        "head_v": (k, h),
        "head_q": (k, h),
    }


def init_model(cfg: ModelConfig) -> Parameters:
    """Seeded initialization: weights uniform in +-1/sqrt(fan_in), zero biases."""
    rng = np.random.default_rng(cfg.seed)
    layers = {}
    for name, (out_dim, in_dim) in _layer_shapes(cfg).items():
        bound = 1.0 / np.sqrt(in_dim)
        w = rng.uniform(-bound, bound, size=(out_dim, in_dim))
        layers[name] = Layer(w, np.zeros(out_dim))
    return Parameters(**layers)


def zeros_like_parameters(params: Parameters) -> Parameters:
    return Parameters(
        **{
            name: Layer(np.zeros_like(layer.w), np.zeros_like(layer.b))
            for name, layer in params.layers()
        }
    )


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class Activations:
    """Forward-pass intermediates; pre-activations are kept for backprop."""

    pre_v: np.ndarray
    z_v: np.ndarray
    pre_q: np.ndarray
    z_q: np.ndarray
    pre_fused: np.ndarray
    z: np.ndarray


def forward_batch(
    params: Parameters, x_v: np.ndarray, x_q: np.ndarray
) -> tuple[Activations, np.ndarray, np.ndarray, np.ndarray]:
    """Run the model on row-stacked inputs.

    Returns the activations plus the three raw sigmoid output matrices
    (main, visual-only, question-only), each of shape (n, num_classes).
    """
    x_v = np.atleast_2d(np.asarray(x_v, dtype=np.float64))
    x_q = np.atleast_2d(np.asarray(x_q, dtype=np.float64))
    if x_v.shape[1] != params.enc_v.w.shape[1]:
        raise ShapeMismatch(f"x_v has width {x_v.shape[1]}, expected {params.enc_v.w.shape[1]}")
    if x_q.shape[1] != params.enc_q.w.shape[1]:
        raise ShapeMismatch(f"x_q has width {x_q.shape[1]}, expected {params.enc_q.w.shape[1]}")

    pre_v = x_v @ params.enc_v.w.T + params.enc_v.b
    z_v = np.maximum(pre_v, 0.0)
    pre_q = x_q @ params.enc_q.w.T + params.enc_q.b
    z_q = np.maximum(pre_q, 0.0)
    fused_in = np.concatenate([z_v, z_q], axis=1)
    pre_fused = fused_in @ params.fusion.w.T + params.fusion.b
    z = np.maximum(pre_fused, 0.0)

    y_main = _sigmoid(z @ params.head_main.w.T + params.head_main.b)
    y_v = _sigmoid(z_v @ params.head_v.w.T + params.head_v.b)
    y_q = _sigmoid(z_q @ params.head_q.w.T + params.head_q.b)
    acts = Activations(pre_v, z_v, pre_q, z_q, pre_fused, z)
    return acts, y_main, y_v, y_q


def forward(params: Parameters, x_v, x_q):
    """Single-sample forward pass.

    Returns the activations and an OutputTriple of the three raw outputs.
    """
    from .acquisition import OutputTriple

    acts, y_main, y_v, y_q = forward_batch(params, x_v, x_q)
    squeezed = Activations(*(a[0] for a in (acts.pre_v, acts.z_v, acts.pre_q, acts.z_q, acts.pre_fused, acts.z)))
    return squeezed, OutputTriple(main=y_main[0], visual_only=y_v[0], question_only=y_q[0])


def _bce_mean(target: np.ndarray, output: np.ndarray) -> float:
    """Binary cross-entropy averaged over classes (and samples, if batched)."""
    target = np.asarray(target, dtype=np.float64)
    output = np.asarray(output, dtype=np.float64)
    log_o = np.log(np.clip(output, LOG_EPS, None))
    log_not_o = np.log(np.clip(1.0 - output, LOG_EPS, None))
    return float(np.mean(-(target * log_o + (1.0 - target) * log_not_o)))


def loss_main(y_hat, y) -> float:
    """BCE between the main output and the (soft) target, mean over classes."""
    return _bce_mean(y, y_hat)


def loss_branch(y_m, y, y_hat, distill_weight: float) -> float:
    """Auxiliary-head loss BCE(y, y_m) + lambda * BCE(y_hat, y_m).

    The main output y_hat enters only as a constant distillation target.
    """
    return _bce_mean(y, y_m) + distill_weight * _bce_mean(y_hat, y_m)


def backward(
    params: Parameters,
    x_v: np.ndarray,
    x_q: np.ndarray,
    targets: np.ndarray,
    distill_weight: float = 1.0,
    include_main: bool = True,
    include_branches: bool = True,
) -> Parameters:
    """Exact gradients for one batch.

    The main loss drives the encoders, fusion block, and main head; the
    branch losses drive only their own heads (detachment), treating the
    main output as a constant distillation target.  Excluded groups get
    zero gradients.
    """
    x_v = np.atleast_2d(np.asarray(x_v, dtype=np.float64))
    x_q = np.atleast_2d(np.asarray(x_q, dtype=np.float64))
    targets = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    acts, y_main, y_v, y_q = forward_batch(params, x_v, x_q)
    n, k = y_main.shape
    scale = 1.0 / (n * k)
    grads = zeros_like_parameters(params)

    if include_main:
        d_main = (y_main - targets) * scale
        grads.head_main.w[:] = d_main.T @ acts.z
        grads.head_main.b[:] = d_main.sum(axis=0)
        d_z = d_main @ params.head_main.w
        d_pre_fused = d_z * (acts.pre_fused > 0.0)
        fused_in = np.concatenate([acts.z_v, acts.z_q], axis=1)
        grads.fusion.w[:] = d_pre_fused.T @ fused_in
        grads.fusion.b[:] = d_pre_fused.sum(axis=0)
        d_fused_in = d_pre_fused @ params.fusion.w
        h = acts.z_v.shape[1]
        d_pre_v = d_fused_in[:, :h] * (acts.pre_v > 0.0)
        grads.enc_v.w[:] = d_pre_v.T @ x_v
        grads.enc_v.b[:] = d_pre_v.sum(axis=0)
        d_pre_q = d_fused_in[:, h:] * (acts.pre_q > 0.0)
        grads.enc_q.w[:] = d_pre_q.T @ x_q
        grads.enc_q.b[:] = d_pre_q.sum(axis=0)

    if include_branches:
        d_v = ((y_v - targets) + distill_weight * (y_v - y_main)) * scale
        grads.head_v.w[:] = d_v.T @ acts.z_v
        grads.head_v.b[:] = d_v.sum(axis=0)
        d_q = ((y_q - targets) + distill_weight * (y_q - y_main)) * scale
        grads.head_q.w[:] = d_q.T @ acts.z_q
        grads.head_q.b[:] = d_q.sum(axis=0)

    return grads


@dataclass
class OptimizerState:
    """Per-array first moment and infinity-norm moment, plus the step count."""

    step: int
    m: dict[str, np.ndarray]
    u: dict[str, np.ndarray]

    @classmethod
    def zeros(cls, params: Parameters) -> "OptimizerState":
        m = {name: np.zeros_like(arr) for name, arr in params.named_arrays()}
        u = {name: np.zeros_like(arr) for name, arr in params.named_arrays()}
        return cls(step=0, m=m, u=u)


def optimizer_step(
    params: Parameters,
    grads: Parameters,
    state: OptimizerState,
    tc: TrainConfig,
) -> None:
    """Apply one optimizer update in place.

    Adamax: m <- b1*m + (1-b1)*g;  u <- max(b2*u, |g|);
            theta <- theta - lr * (m / (1 - b1^t)) / (u + eps).
    SGD:    theta <- theta - lr * g.
    """
    if tc.optimizer == "sgd":
        for (_, p_arr), (_, g_arr) in zip(params.named_arrays(), grads.named_arrays()):
            p_arr -= tc.learning_rate * g_arr
        return
    b1, b2 = tc.adamax_betas
    state.step += 1
    bias_correction = 1.0 - b1**state.step
    for (name, p_arr), (_, g_arr) in zip(params.named_arrays(), grads.named_arrays()):
        m = state.m[name]
        u = state.u[name]
        m *= b1
        m += (1.0 - b1) * g_arr
        np.maximum(b2 * u, np.abs(g_arr), out=u)
        p_arr -= tc.learning_rate * (m / bias_correction) / (u + tc.adamax_eps)


def stack_features(samples: Sequence) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Row-stack x_v, x_q and targets from a sequence of samples."""
    x_v = np.stack([np.asarray(s.x_v, dtype=np.float64) for s in samples])
    x_q = np.stack([np.asarray(s.x_q, dtype=np.float64) for s in samples])
    y = np.stack([np.asarray(s.target, dtype=np.float64) for s in samples])
    return x_v, x_q, y


def train(
    params: Parameters,
    labeled: Sequence,
    tc: TrainConfig,
    distill_weight: float = 1.0,
    seed_key: Sequence[int] = (0,),
    include_branches: bool = True,
    epoch_callback: Callable[[int, Parameters], None] | None = None,
) -> tuple[Parameters, list[float]]:
    """Train in place for ``tc.max_epoch`` epochs of shuffled mini-batches.

    The shuffle for epoch e is seeded by (*seed_key, e) so runs are
    reproducible without repeating the same order every epoch.  Returns the
    trained parameters and the main-head training loss measured on the full
    labeled set after each epoch.
    """
    if len(labeled) == 0:
        raise EmptyLabeledSet("training requires at least one labeled sample")
    x_v, x_q, y = stack_features(labeled)
    n = x_v.shape[0]
    opt_state = OptimizerState.zeros(params)
    epoch_losses = []
    for epoch in range(tc.max_epoch):
        order = np.random.default_rng([*seed_key, epoch]).permutation(n)
        for start in range(0, n, tc.batch_size):
            idx = order[start : start + tc.batch_size]
            grads = backward(
                params,
                x_v[idx],
                x_q[idx],
                y[idx],
                distill_weight=distill_weight,
                include_branches=include_branches,
            )
            optimizer_step(params, grads, opt_state, tc)
        _, y_main, _, _ = forward_batch(params, x_v, x_q)
        epoch_losses.append(loss_main(y_main, y))
        if epoch_callback is not None:
            epoch_callback(epoch, params)
    return params, epoch_losses


def save_parameters(path, params: Parameters) -> None:
    """Write a checkpoint: magic line, dims line, then raw float64 blocks.

    Arrays are stored row-major little-endian, in the fixed group order
    enc_v, enc_q, fusion, head_main, head_v, head_q (weight then bias).
    """
    hidden, dim_v = params.enc_v.w.shape
    dim_q = params.enc_q.w.shape[1]
    num_classes = params.head_main.w.shape[0]
    header = f"dim_v={dim_v} dim_q={dim_q} hidden={hidden} num_classes={num_classes}\n"
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(header.encode("ascii"))
        for _, arr in params.named_arrays():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_parameters(path) -> Parameters:
    """Read a checkpoint written by :func:`save_parameters`."""
    data = Path(path).read_bytes()
    if not data.startswith(CHECKPOINT_MAGIC):
        raise ValueError("not a tri-branch parameter checkpoint")
    body = data[len(CHECKPOINT_MAGIC) :]
    header, _, blob = body.partition(b"\n")
    dims = dict(kv.split("=") for kv in header.decode("ascii").split())
    cfg = ModelConfig(
        dim_v=int(dims["dim_v"]),
        dim_q=int(dims["dim_q"]),
        hidden=int(dims["hidden"]),
        num_classes=int(dims["num_classes"]),
    )
    layers = {}
    offset = 0
    for name, (out_dim, in_dim) in _layer_shapes(cfg).items():
        w_bytes = out_dim * in_dim * 8
        w = np.frombuffer(blob, dtype="<f8", count=out_dim * in_dim, offset=offset)
        offset += w_bytes
        b = np.frombuffer(blob, dtype="<f8", count=out_dim, offset=offset)
        offset += out_dim * 8
        layers[name] = Layer(w.reshape(out_dim, in_dim).copy(), b.copy())
    if offset != len(blob):
        raise ValueError("checkpoint size does not match its header dims")
    return Parameters(**layers)
