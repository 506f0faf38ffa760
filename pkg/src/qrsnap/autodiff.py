"""Small dense CNN with hand-written reverse-mode gradients.

Tensors are float64 numpy arrays. A network is described by an
:class:`Architecture` (input shape plus a flat layer list) and its weights live
in :class:`ModelParams`, an ordered name -> array mapping. ``model_forward``
records every layer's saved intermediates on a :class:`Tape`;
``loss_softmax_ce`` appends the loss node, and ``backward`` walks the tape in
reverse once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class ShapeError(ValueError):
    pass


# --------------------------------------------------------------------------
# architecture descriptor


@dataclass(frozen=True)
class Layer:
    kind: str  # conv | relu | maxpool | flatten | dense
    size: int = 0  # conv: out channels, dense: out features, maxpool: window
    kernel: int = 0
    pad: int = 0

    def describe(self) -> str:
        if self.kind == "conv":
            return f"conv {self.size} k{self.kernel} p{self.pad}"
        if self.kind in ("maxpool", "dense"):
            return f"{self.kind} {self.size}"
        return self.kind


@dataclass(frozen=True)
class Architecture:
    input_shape: tuple[int, int, int]  # C, H, W
    layers: tuple[Layer, ...]

    def describe(self) -> str:
        c, h, w = self.input_shape
        return "; ".join([f"input {c}x{h}x{w}"] + [layer.describe() for layer in self.layers])

    @classmethod
    def parse(cls, text: str) -> "Architecture":
        parts = [p.strip() for p in text.split(";") if p.strip()]
        if not parts or not parts[0].startswith("input "):
            raise ValueError(f"architecture must start with 'input CxHxW': {text!r}")
        try:
            dims = tuple(int(d) for d in parts[0].split()[1].split("x"))
        except (IndexError, ValueError):
            raise ValueError(f"bad input shape in {parts[0]!r}") from None
        if len(dims) != 3 or min(dims) < 1:
            raise ValueError(f"bad input shape in {parts[0]!r}")
        layers = []
        for part in parts[1:]:
            tok = part.split()
            try:
                if tok[0] == "conv" and len(tok) == 4:
                    layers.append(Layer("conv", int(tok[1]), int(tok[2].lstrip("k")), int(tok[3].lstrip("p"))))
                elif tok[0] in ("maxpool", "dense") and len(tok) == 2:
                    layers.append(Layer(tok[0], int(tok[1])))
                elif tok[0] in ("relu", "flatten") and len(tok) == 1:
                    layers.append(Layer(tok[0]))
                else:
                    raise ValueError
            except ValueError:
                raise ValueError(f"bad layer spec {part!r}") from None
        arch = cls(dims, tuple(layers))  # type: ignore[arg-type]
        arch.param_shapes()  # validates
        return arch

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        """Ordered parameter shapes; raises if the layer list is inconsistent."""
        return self._walk()[0]

    def _walk(self) -> tuple[dict[str, tuple[int, ...]], tuple[int, ...]]:
        shapes: dict[str, tuple[int, ...]] = {}
        shape: tuple[int, ...] = self.input_shape
        n_conv = n_dense = 0
        for layer in self.layers:
            if layer.kind == "conv":
                if len(shape) != 3:
                    raise ShapeError("conv layer after flatten")
                if layer.size < 1 or layer.kernel < 1 or layer.pad < 0:
                    raise ShapeError(f"bad conv layer {layer.describe()!r}")
                c, h, w = shape
                h2, w2 = h + 2 * layer.pad - layer.kernel + 1, w + 2 * layer.pad - layer.kernel + 1
                if h2 < 1 or w2 < 1:
                    raise ShapeError(f"conv kernel {layer.kernel} larger than padded input {h}x{w}")
                n_conv += 1
                shapes[f"conv{n_conv}.weight"] = (layer.size, c, layer.kernel, layer.kernel)
                shapes[f"conv{n_conv}.bias"] = (layer.size,)
                shape = (layer.size, h2, w2)
            elif layer.kind == "maxpool":
                if len(shape) != 3 or layer.size < 1:
                    raise ShapeError("maxpool needs a CxHxW input")
                c, h, w = shape
                if h % layer.size or w % layer.size:
                    raise ShapeError(f"maxpool {layer.size} does not divide {h}x{w}")
                shape = (c, h // layer.size, w // layer.size)
            elif layer.kind == "flatten":
                shape = (math.prod(shape),)
            elif layer.kind == "dense":
                if len(shape) != 1:
                    raise ShapeError("dense layer needs a flat input")
                if layer.size < 1:
                    raise ShapeError("dense layer needs a positive width")
                n_dense += 1
                shapes[f"dense{n_dense}.weight"] = (layer.size, shape[0])
                shapes[f"dense{n_dense}.bias"] = (layer.size,)
                shape = (layer.size,)
            elif layer.kind == "relu":
                pass
            else:
                raise ShapeError(f"unknown layer kind {layer.kind!r}")
        return shapes, shape

    @property
    def num_classes(self) -> int:
        out = self._walk()[1]
        if len(out) != 1:
            raise ShapeError("architecture does not end in a flat output")
        return out[0]


def default_architecture(channels: int = 3, size: int = 32, num_classes: int = 4) -> Architecture:
    return Architecture(
        (channels, size, size),
        (
            Layer("conv", 8, 3, 1),
            Layer("relu"),
            Layer("maxpool", 2),
            Layer("conv", 16, 3, 1),
            Layer("relu"),
            Layer("maxpool", 2),
            Layer("flatten"),
            Layer("dense", num_classes),
        ),
    )


@dataclass
class ModelParams:
    arch: Architecture
    tensors: dict[str, np.ndarray]

    def __post_init__(self):
        expected = self.arch.param_shapes()
        if list(self.tensors) != list(expected):
            raise ShapeError(f"parameter names {list(self.tensors)} do not match architecture {list(expected)}")
        for name, shape in expected.items():
            t = self.tensors[name]
            if t.shape != shape:
                raise ShapeError(f"{name}: shape {t.shape} != expected {shape}")
            if t.dtype != np.float64:
                raise ShapeError(f"{name}: dtype {t.dtype} is not float64")

    def copy(self) -> "ModelParams":
        return ModelParams(self.arch, {k: v.copy() for k, v in self.tensors.items()})

    def zeros_like(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.tensors.items()}

    def __iter__(self):
        return iter(self.tensors.items())


def init_params(arch: Architecture, rng: np.random.Generator) -> ModelParams:
    """Fan-in scaled uniform (He) weights, zero biases."""
    tensors = {}
    for name, shape in arch.param_shapes().items():
        if name.endswith(".bias"):
            tensors[name] = np.zeros(shape)
        else:
            fan_in = math.prod(shape[1:])
            bound = math.sqrt(6.0 / fan_in)
            tensors[name] = rng.uniform(-bound, bound, size=shape)
    return ModelParams(arch, tensors)


def zero_params(arch: Architecture) -> ModelParams:
    return ModelParams(arch, {k: np.zeros(s) for k, s in arch.param_shapes().items()})


# --------------------------------------------------------------------------
# forward / backward


@dataclass
class Tape:
    nodes: list = field(default_factory=list)
    loss_grad: np.ndarray | None = None
    consumed: bool = False


def _conv_forward(x, w, b, pad):
    n, c, h, wd = x.shape
    o, _, k, _ = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    win = sliding_window_view(xp, (k, k), axis=(2, 3))  # N,C,H',W',k,k
    h2, w2 = win.shape[2], win.shape[3]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * h2 * w2, c * k * k)
    out = cols @ w.reshape(o, -1).T + b
    return out.reshape(n, h2, w2, o).transpose(0, 3, 1, 2), cols


def _conv_backward(dout, cols, x_shape, w, pad):
    n, c, h, wd = x_shape
    o, _, k, _ = w.shape
    h2, w2 = dout.shape[2], dout.shape[3]
    dy = dout.transpose(0, 2, 3, 1).reshape(-1, o)
    dw = (dy.T @ cols).reshape(w.shape)
    db = dy.sum(axis=0)
    dcols = (dy @ w.reshape(o, -1)).reshape(n, h2, w2, c, k, k)
    dxp = np.zeros((n, c, h + 2 * pad, wd + 2 * pad))
    for i in range(k):
        for j in range(k):
            dxp[:, :, i : i + h2, j : j + w2] += dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    dx = dxp[:, :, pad : pad + h, pad : pad + wd] if pad else dxp
    return dx, dw, db


def _pool_windows(x, s):
    n, c, h, w = x.shape
    return x.reshape(n, c, h // s, s, w // s, s).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h // s, w // s, s * s)


def model_forward(params: ModelParams, batch: np.ndarray, record: bool = True) -> tuple[np.ndarray, Tape | None]:
    """Run the network on an N x C x H x W batch; returns logits and the tape."""
    arch = params.arch
    batch = np.asarray(batch)
    if batch.ndim != 4 or batch.shape[1:] != tuple(arch.input_shape):
        raise ShapeError(
            f"batch shape {batch.shape} does not match architecture input N x {'x'.join(map(str, arch.input_shape))}"
        )
    tape = Tape() if record else None
    x = batch.astype(np.float64, copy=False)
    n_conv = n_dense = 0
    for layer in arch.layers:
        if layer.kind == "conv":
            n_conv += 1
            names = (f"conv{n_conv}.weight", f"conv{n_conv}.bias")
            w, b = params.tensors[names[0]], params.tensors[names[1]]
            y, cols = _conv_forward(x, w, b, layer.pad)
            if tape is not None:
                tape.nodes.append(("conv", names, (cols, x.shape, layer.pad)))
        elif layer.kind == "relu":
            y = np.maximum(x, 0.0)
            if tape is not None:
                tape.nodes.append(("relu", (), x > 0))
        elif layer.kind == "maxpool":
            s = layer.size
            win = _pool_windows(x, s)
            idx = win.argmax(axis=-1)
            y = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]
            if tape is not None:
                tape.nodes.append(("maxpool", (), (idx, x.shape, s)))
        elif layer.kind == "flatten":
            y = x.reshape(x.shape[0], -1)
            if tape is not None:
                tape.nodes.append(("flatten", (), x.shape))
        elif layer.kind == "dense":
            n_dense += 1
            names = (f"dense{n_dense}.weight", f"dense{n_dense}.bias")
            w, b = params.tensors[names[0]], params.tensors[names[1]]
            y = x @ w.T + b
            if tape is not None:
                tape.nodes.append(("dense", names, x))
        else:  # pragma: no cover - rejected by Architecture
            raise ShapeError(layer.kind)
        x = y
    return x, tape


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.exp(logits - logits.max(axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


def loss_softmax_ce(logits: np.ndarray, targets: np.ndarray, tape: Tape | None = None) -> float:
    """Mean soft-target cross entropy. Records d(loss)/d(logits) on ``tape``."""
    targets = np.asarray(targets, dtype=np.float64)
    if targets.shape != logits.shape:
        raise ShapeError(f"targets shape {targets.shape} != logits shape {logits.shape}")
    if np.any(targets < 0) or np.any(np.abs(targets.sum(axis=1) - 1.0) > 1e-9):
        raise ValueError("every target row must be a probability distribution summing to 1")
    n = logits.shape[0]
    logp = log_softmax(logits)
    loss = float(-(targets * logp).sum() / n)
    if tape is not None:
        tape.loss_grad = (np.exp(logp) - targets) / n
    return max(loss, 0.0)


def backward(tape: Tape, params: ModelParams) -> dict[str, np.ndarray]:
    if tape.consumed:
        raise RuntimeError("backward already ran on this tape")
    if tape.loss_grad is None:
        raise RuntimeError("tape has no loss; call loss_softmax_ce with the tape first")
    tape.consumed = True
    grads = params.zeros_like()
    g = tape.loss_grad
    for kind, names, saved in reversed(tape.nodes):
        if kind == "dense":
            x = saved
            w = params.tensors[names[0]]
            grads[names[0]] += g.T @ x
            grads[names[1]] += g.sum(axis=0)
            g = g @ w
        elif kind == "flatten":
            g = g.reshape(saved)
        elif kind == "maxpool":
            idx, shape, s = saved
            n, c, h, w = shape
            dwin = np.zeros(idx.shape + (s * s,))
            np.put_along_axis(dwin, idx[..., None], g[..., None], axis=-1)
            g = dwin.reshape(n, c, h // s, w // s, s, s).transpose(0, 1, 2, 4, 3, 5).reshape(shape)
        elif kind == "relu":
            g = g * saved
        elif kind == "conv":
            cols, x_shape, pad = saved
            w = params.tensors[names[0]]
            g, dw, db = _conv_backward(g, cols, x_shape, w, pad)
            grads[names[0]] += dw
            grads[names[1]] += db
    tape.nodes.clear()
    return grads


def loss_and_grads(params: ModelParams, batch: np.ndarray, targets: np.ndarray) -> tuple[float, dict[str, np.ndarray]]:
    logits, tape = model_forward(params, batch)
    loss = loss_softmax_ce(logits, targets, tape)
    return loss, backward(tape, params)


def _kink_pattern(tape: Tape) -> list[np.ndarray]:
    return [saved if kind == "relu" else saved[0] for kind, _, saved in tape.nodes if kind in ("relu", "maxpool")]


def _same_pattern(a: list[np.ndarray], b: list[np.ndarray]) -> bool:
    return all(np.array_equal(x, y) for x, y in zip(a, b))


def grad_check(
    params: ModelParams,
    batch: np.ndarray,
    targets: np.ndarray,
    epsilon: float = 1e-5,
    per_tensor: int = 8,
    seed: int = 0,
    gradients: dict[str, np.ndarray] | None = None,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Up to ``per_tensor`` entries are sampled from each parameter tensor. An
    entry whose +/- epsilon probe flips a ReLU mask or a max-pool winner is
    skipped in favour of the next candidate, since the central difference
    straddles a kink there and estimates no derivative. Pass ``gradients`` to
    check a precomputed gradient instead of the one ``backward`` produces.
    """
    if not 1e-7 <= epsilon <= 1e-3:
        raise ValueError(f"epsilon must lie in [1e-7, 1e-3], got {epsilon}")
    if gradients is None:
        _, gradients = loss_and_grads(params, batch, targets)
    rng = np.random.default_rng(seed)
    probe = params.copy()

    def evaluate():
        logits, tape = model_forward(probe, batch)
        return loss_softmax_ce(logits, targets), _kink_pattern(tape)

    worst = 0.0
    for name, tensor in probe.tensors.items():
        flat = tensor.reshape(-1)
        checked = 0
        for i in rng.permutation(flat.size):
            if checked == per_tensor:
                break
            orig = flat[i]
            flat[i] = orig + epsilon
            up, up_pattern = evaluate()
            flat[i] = orig - epsilon
            down, down_pattern = evaluate()
            flat[i] = orig
            if not _same_pattern(up_pattern, down_pattern):
                continue
            checked += 1
            numeric = (up - down) / (2 * epsilon)
            analytic = gradients[name].reshape(-1)[i]
            err = abs(analytic - numeric) / max(1.0, abs(analytic), abs(numeric))
            worst = max(worst, err)
    return worst


def sgd_step(
    params: ModelParams,
    gradients: dict[str, np.ndarray],
    lr: float,
    momentum: float,
    velocity: dict[str, np.ndarray],
) -> ModelParams:
    """In-place momentum SGD: v <- momentum*v + g; p <- p - lr*v."""
    if lr < 0:
        raise ValueError(f"learning rate must be >= 0, got {lr}")
    if not 0.0 <= momentum < 1.0:
        raise ValueError(f"momentum must be in [0, 1), got {momentum}")
    for name, p in params.tensors.items():
        g = gradients[name]
        if g.shape != p.shape:
            raise ShapeError(f"gradient for {name} has shape {g.shape}, expected {p.shape}")
        v = velocity.setdefault(name, np.zeros_like(p))
        if v.shape != p.shape:
            raise ShapeError(f"velocity for {name} has shape {v.shape}, expected {p.shape}")
        v *= momentum
        v += g
        if lr != 0.0:
            p -= lr * v
    return params
