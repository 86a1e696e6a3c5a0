"""Three-layer perceptron: forward pass, SSE objective, analytic gradient,
full-batch gradient-descent training, and best-of-K restart search."""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import (
    DataError,
    DivergenceError,
    NonDifferentiableError,
    ReportFormatError,
    ReportVersionError,
)
from .series import WindowedDataset, _frozen_array

_SEED_MASK = (1 << 64) - 1


class Activation(Enum):
    """Node transfer functions."""

    HARD_LIMIT = "hard_limit"
    PURE_LINEAR = "pure_linear"
    SIGMOID = "sigmoid"
    TANSIGMOID = "tansigmoid"


_DIFFERENTIABLE = (Activation.PURE_LINEAR, Activation.SIGMOID, Activation.TANSIGMOID)


def _activate_inplace(kind: Activation, z: np.ndarray) -> np.ndarray:
    """Apply an activation, overwriting ``z`` where the formula allows."""
    if kind is Activation.PURE_LINEAR:
        return z
    if kind is Activation.SIGMOID:
        # 1/(1+exp(-z)); exp may overflow for very negative z, and
        # 1/(1+inf) -> 0 is exactly the right limit
        np.negative(z, out=z)
        with np.errstate(over="ignore"):
            np.exp(z, out=z)
        z += 1.0
        return np.reciprocal(z, out=z)
    if kind is Activation.TANSIGMOID:
        return np.tanh(z, out=z)
    if kind is Activation.HARD_LIMIT:
        return np.where(z >= 0.0, 1.0, 0.0)
    raise DataError(f"unknown activation {kind!r}")


def _apply_activation(kind: Activation, z: np.ndarray) -> np.ndarray:
    if kind in (Activation.PURE_LINEAR, Activation.HARD_LIMIT):
        return _activate_inplace(kind, z)
    return _activate_inplace(kind, np.array(z, dtype=float))


def _scale_by_slope_inplace(kind: Activation, delta: np.ndarray,
                            activ: np.ndarray) -> np.ndarray:
    """delta *= activation slope, with the slope built by destroying ``activ``.

    Slopes are expressed through the activation output: 1 for pure_linear,
    a(1-a) for sigmoid, 1-a^2 for tansigmoid.
    """
    if kind is Activation.PURE_LINEAR:
        return delta
    if kind is Activation.SIGMOID:
        delta *= activ
        np.subtract(1.0, activ, out=activ)
        delta *= activ
        return delta
    if kind is Activation.TANSIGMOID:
        np.multiply(activ, activ, out=activ)
        np.subtract(1.0, activ, out=activ)
        delta *= activ
        return delta
    raise NonDifferentiableError(f"{kind.value} has no derivative")


def activate(kind: Activation, x):
    """Apply a transfer function to a scalar or array of finite values."""
    arr = np.asarray(x, dtype=float)
    out = _apply_activation(kind, np.atleast_1d(arr))
    return float(out[0]) if arr.ndim == 0 else out


@dataclass(frozen=True)
class Architecture:
    """Shape of the network: p inputs, h hidden units, one output node."""

    input_count: int
    hidden_count: int
    hidden_activation: Activation = Activation.SIGMOID
    output_activation: Activation = Activation.PURE_LINEAR

    def __post_init__(self):
        if self.input_count < 1:
            raise DataError("input_count must be at least 1")
        if self.hidden_count < 1:
            raise DataError("hidden_count must be at least 1")


@dataclass(frozen=True, eq=False)
class Mlp:
    """Fully connected three-layer network: weights and biases per layer."""

    arch: Architecture
    hidden_weights: np.ndarray  # (h, p)
    hidden_biases: np.ndarray  # (h,)
    output_weights: np.ndarray  # (h,)
    output_bias: float

    def __post_init__(self):
        object.__setattr__(self, "hidden_weights", _frozen_array(self.hidden_weights))
        object.__setattr__(self, "hidden_biases", _frozen_array(self.hidden_biases))
        object.__setattr__(self, "output_weights", _frozen_array(self.output_weights))
        object.__setattr__(self, "output_bias", float(self.output_bias))
        p, h = self.arch.input_count, self.arch.hidden_count
        if self.hidden_weights.shape != (h, p):
            raise DataError(f"hidden_weights must have shape {(h, p)}")
        if self.hidden_biases.shape != (h,):
            raise DataError(f"hidden_biases must have shape {(h,)}")
        if self.output_weights.shape != (h,):
            raise DataError(f"output_weights must have shape {(h,)}")
        for arr in (self.hidden_weights, self.hidden_biases, self.output_weights):
            if not np.all(np.isfinite(arr)):
                raise DataError("network parameters must be finite")
        if not np.isfinite(self.output_bias):
            raise DataError("network parameters must be finite")

    def __eq__(self, other) -> bool:
        if not isinstance(other, Mlp):
            return NotImplemented
        return (
            self.arch == other.arch
            and np.array_equal(self.hidden_weights, other.hidden_weights)
            and np.array_equal(self.hidden_biases, other.hidden_biases)
            and np.array_equal(self.output_weights, other.output_weights)
            and self.output_bias == other.output_bias
        )


@dataclass(frozen=True, eq=False)
class Gradient:
    """Partial derivatives of the SSE, shaped like the network parameters."""

    hidden_weights: np.ndarray
    hidden_biases: np.ndarray
    output_weights: np.ndarray
    output_bias: float


@dataclass(frozen=True)
class TrainConfig:
    """Knobs for gradient-descent training and the restart search.

    The learning rate multiplies the gradient of the summed (not averaged)
    SSE, so stable values shrink with pattern count; the default is sized
    for a few hundred to ~1000 patterns of [0, 1]-scaled data.
    """

    learning_rate: float = 1e-4
    max_epochs: int = 2000
    min_sse_delta: float = 1e-10
    restarts: int = 50
    init_half_width: float = 0.5
    master_seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0.0:
            raise DataError("learning_rate must be positive")
        if self.max_epochs < 1:
            raise DataError("max_epochs must be at least 1")
        if self.min_sse_delta < 0.0:
            raise DataError("min_sse_delta must be nonnegative")
        if self.restarts < 1:
            raise DataError("restarts must be at least 1")
        if not self.init_half_width > 0.0:
            raise DataError("init_half_width must be positive")


@dataclass(frozen=True, eq=False)
class TrainRun:
    """Outcome of a single gradient-descent run."""

    net: Mlp
    sse: float
    sse_trace: np.ndarray  # SSE after each completed epoch
    diverged: bool

    def __post_init__(self):
        object.__setattr__(self, "sse_trace", _frozen_array(self.sse_trace))

    @property
    def epochs_run(self) -> int:
        return len(self.sse_trace)


@dataclass(frozen=True, eq=False)
class TrainResult:
    """Best restart of a multi-restart search."""

    best_net: Mlp
    best_sse: float
    best_restart_index: int
    epochs_run: int
    sse_trace: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "sse_trace", _frozen_array(self.sse_trace))

    def __eq__(self, other) -> bool:
        if not isinstance(other, TrainResult):
            return NotImplemented
        return (
            self.best_net == other.best_net
            and self.best_sse == other.best_sse
            and self.best_restart_index == other.best_restart_index
            and self.epochs_run == other.epochs_run
            and np.array_equal(self.sse_trace, other.sse_trace)
        )


def restart_seed(master_seed: int, p: int, h: int, restart_index: int) -> int:
    """64-bit seed for one restart, mixed from the run coordinates.

    Depends only on (master_seed, p, h, restart_index), so results cannot
    change with grid scheduling or worker count.
    """
    seq = np.random.SeedSequence(
        entropy=int(master_seed) & _SEED_MASK, spawn_key=(p, h, restart_index)
    )
    return int(seq.generate_state(1, np.uint64)[0])


def init_weights(arch: Architecture, seed: int, half_width: float) -> Mlp:
    """Draw every parameter independently from uniform(-half_width, +half_width).

    Draw order is fixed: hidden_weights (row-major), hidden_biases,
    output_weights, output_bias. The same seed reproduces the network bit
    for bit.
    """
    rng = np.random.default_rng(int(seed) & _SEED_MASK)
    p, h = arch.input_count, arch.hidden_count
    return Mlp(
        arch=arch,
        hidden_weights=rng.uniform(-half_width, half_width, size=(h, p)),
        hidden_biases=rng.uniform(-half_width, half_width, size=h),
        output_weights=rng.uniform(-half_width, half_width, size=h),
        output_bias=float(rng.uniform(-half_width, half_width)),
    )


def _check_window(net: Mlp, data: WindowedDataset):
    if data.window_len != net.arch.input_count:
        raise DataError(
            f"dataset window length {data.window_len} does not match "
            f"network input count {net.arch.input_count}"
        )


def forward(net: Mlp, input) -> float:
    """Network output for a single input pattern of length p."""
    x = np.asarray(input, dtype=float)
    if x.shape != (net.arch.input_count,):
        raise DataError(
            f"input shape {x.shape} does not match ({net.arch.input_count},)"
        )
    hidden = _apply_activation(
        net.arch.hidden_activation, net.hidden_weights @ x + net.hidden_biases
    )
    z = float(net.output_weights @ hidden) + net.output_bias
    return activate(net.arch.output_activation, z)


def predict(net: Mlp, inputs) -> np.ndarray:
    """Network outputs for a matrix of input patterns, one row per pattern."""
    x = np.asarray(inputs, dtype=float)
    if x.ndim != 2 or x.shape[1] != net.arch.input_count:
        raise DataError(
            f"input matrix shape {x.shape} does not match (n, {net.arch.input_count})"
        )
    hidden = _apply_activation(
        net.arch.hidden_activation, x @ net.hidden_weights.T + net.hidden_biases
    )
    out = hidden @ net.output_weights + net.output_bias
    return _apply_activation(net.arch.output_activation, out)


def sse(net: Mlp, data: WindowedDataset) -> float:
    """Sum of squared errors of the network over all patterns."""
    _check_window(net, data)
    resid = data.targets - predict(net, data.inputs)
    return float(resid @ resid)


class _Workspace:
    """Preallocated intermediates for repeated gradient evaluations.

    Reallocating the (n, h) temporaries every epoch costs ~3x the arithmetic
    itself (large blocks come straight from mmap and fault in each time), so
    the training loop owns one workspace and every evaluation writes into it.
    """

    def __init__(self, n: int, p: int, h: int):
        self.z = np.empty((n, h))
        self.z2 = np.empty(n)
        self.resid = np.empty(n)
        self.dh = np.empty((n, h))
        self.g_w1 = np.empty((h, p))
        self.g_b1 = np.empty(h)
        self.g_w2 = np.empty(h)


def _sse_and_gradient(w1, b1, w2, b2, hidden_act, output_act, inputs, targets,
                      work: _Workspace | None = None):
    """Fused objective and gradient at raw parameter arrays.

    Returns views into ``work``; the caller must consume them before the
    next evaluation against the same workspace.
    """
    if work is None:
        work = _Workspace(inputs.shape[0], inputs.shape[1], w1.shape[0])
    z = work.z
    np.dot(inputs, w1.T, out=z)
    z += b1
    hidden = _activate_inplace(hidden_act, z)
    np.dot(hidden, w2, out=work.z2)
    work.z2 += b2
    out = _activate_inplace(output_act, work.z2)
    np.subtract(out, targets, out=work.resid)
    delta_out = work.resid
    total = float(delta_out @ delta_out)
    delta_out *= 2.0
    delta_out = _scale_by_slope_inplace(output_act, delta_out, out)
    np.dot(hidden.T, delta_out, out=work.g_w2)
    g_b2 = float(delta_out.sum())
    np.outer(delta_out, w2, out=work.dh)
    delta_hidden = _scale_by_slope_inplace(hidden_act, work.dh, hidden)
    np.dot(delta_hidden.T, inputs, out=work.g_w1)
    delta_hidden.sum(axis=0, out=work.g_b1)
    return total, work.g_w1, work.g_b1, work.g_w2, g_b2


def _require_differentiable(net: Mlp):
    for kind in (net.arch.hidden_activation, net.arch.output_activation):
        if kind not in _DIFFERENTIABLE:
            raise NonDifferentiableError(
                f"cannot differentiate through {kind.value} activation"
            )


def gradient(net: Mlp, data: WindowedDataset) -> Gradient:
    """Exact partial derivatives of sse(net, data), summed over patterns."""
    _check_window(net, data)
    _require_differentiable(net)
    _, g_w1, g_b1, g_w2, g_b2 = _sse_and_gradient(
        net.hidden_weights,
        net.hidden_biases,
        net.output_weights,
        net.output_bias,
        net.arch.hidden_activation,
        net.arch.output_activation,
        data.inputs,
        data.targets,
    )
    return Gradient(
        hidden_weights=g_w1, hidden_biases=g_b1, output_weights=g_w2, output_bias=g_b2
    )


def train(net0: Mlp, data: WindowedDataset, cfg: TrainConfig) -> TrainRun:
    """Full-batch gradient descent from ``net0``.

    Each epoch applies params <- params - learning_rate * gradient, stopping
    early once an epoch's SSE improvement is nonnegative and below
    ``min_sse_delta``. A worsening epoch never stops the run: brief
    overshoot oscillations are normal at workable learning rates, and only
    a vanishing improvement signals convergence. If any parameter or the
    SSE turns non-finite, the run aborts and returns the last finite state
    with ``diverged`` set; the caller decides whether to discard it.
    """
    _check_window(net0, data)
    _require_differentiable(net0)
    hidden_act = net0.arch.hidden_activation
    output_act = net0.arch.output_activation
    inputs, targets = data.inputs, data.targets
    lr = cfg.learning_rate

    w1 = net0.hidden_weights.copy()
    b1 = net0.hidden_biases.copy()
    w2 = net0.output_weights.copy()
    b2 = net0.output_bias
    work = _Workspace(inputs.shape[0], inputs.shape[1], w1.shape[0])
    trace: list[float] = []
    diverged = False
    # blow-ups surface as non-finite values and are handled explicitly below,
    # so the numpy overflow warnings on a diverging run are pure noise
    with np.errstate(over="ignore", invalid="ignore"):
        sse_prev, g_w1, g_b1, g_w2, g_b2 = _sse_and_gradient(
            w1, b1, w2, b2, hidden_act, output_act, inputs, targets, work
        )
        for _ in range(cfg.max_epochs):
            w1_new = w1 - lr * g_w1
            b1_new = b1 - lr * g_b1
            w2_new = w2 - lr * g_w2
            b2_new = b2 - lr * g_b2
            if not (
                np.all(np.isfinite(w1_new))
                and np.all(np.isfinite(b1_new))
                and np.all(np.isfinite(w2_new))
                and np.isfinite(b2_new)
            ):
                diverged = True
                break
            sse_new, g_w1, g_b1, g_w2, g_b2 = _sse_and_gradient(
                w1_new, b1_new, w2_new, b2_new, hidden_act, output_act,
                inputs, targets, work,
            )
            if not np.isfinite(sse_new):
                diverged = True
                break
            w1, b1, w2, b2 = w1_new, b1_new, w2_new, b2_new
            trace.append(sse_new)
            improvement = sse_prev - sse_new
            sse_prev = sse_new
            if 0.0 <= improvement < cfg.min_sse_delta:
                break

    net = Mlp(
        arch=net0.arch,
        hidden_weights=w1,
        hidden_biases=b1,
        output_weights=w2,
        output_bias=b2,
    )
    return TrainRun(net=net, sse=sse_prev, sse_trace=np.array(trace), diverged=diverged)


def train_multi_restart(
    arch: Architecture, data: WindowedDataset, cfg: TrainConfig
) -> TrainResult:
    """Best of ``cfg.restarts`` independent trainings from seeded random inits.

    Restart k starts from init_weights seeded by
    restart_seed(master_seed, p, h, k). Diverged restarts are discarded; the
    winner is the minimum final SSE, ties broken by lowest restart index.
    """
    best: TrainRun | None = None
    best_index = -1
    for index in range(cfg.restarts):
        seed = restart_seed(
            cfg.master_seed, arch.input_count, arch.hidden_count, index
        )
        net0 = init_weights(arch, seed, cfg.init_half_width)
        run = train(net0, data, cfg)
        if run.diverged:
            continue
        if best is None or run.sse < best.sse:
            best = run
            best_index = index
    if best is None:
        raise DivergenceError(f"all {cfg.restarts} restarts diverged")
    return TrainResult(
        best_net=best.net,
        best_sse=best.sse,
        best_restart_index=best_index,
        epochs_run=best.epochs_run,
        sse_trace=best.sse_trace,
    )


_MODEL_FORMAT = "fxcast-mlp"
_MODEL_VERSION = 1


def save_model(net: Mlp, sink):
    """Serialize a network as one JSON record, full decimal precision.

    Field order: architecture (p, h, activation kinds), then parameters as
    hidden_weights rows, hidden_biases, output_weights, output_bias.
    """
    record = {
        "format": _MODEL_FORMAT,
        "version": _MODEL_VERSION,
        "p": net.arch.input_count,
        "h": net.arch.hidden_count,
        "hidden_activation": net.arch.hidden_activation.value,
        "output_activation": net.arch.output_activation.value,
        "hidden_weights": net.hidden_weights.tolist(),
        "hidden_biases": net.hidden_biases.tolist(),
        "output_weights": net.output_weights.tolist(),
        "output_bias": net.output_bias,
    }
    text = json.dumps(record) + "\n"
    if isinstance(sink, (str, Path)):
        Path(sink).write_text(text, encoding="utf-8")
    else:
        sink.write(text)


def load_model(source) -> Mlp:
    """Load a network saved by save_model."""
    if isinstance(source, (str, Path)):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source.read()
    try:
        record = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ReportFormatError(f"corrupt model file: {exc}") from None
    if not isinstance(record, dict) or record.get("format") != _MODEL_FORMAT:
        raise ReportFormatError("not a model file")
    if record.get("version") != _MODEL_VERSION:
        raise ReportVersionError(
            f"unsupported model version {record.get('version')!r}"
        )
    try:
        arch = Architecture(
            input_count=record["p"],
            hidden_count=record["h"],
            hidden_activation=Activation(record["hidden_activation"]),
            output_activation=Activation(record["output_activation"]),
        )
        return Mlp(
            arch=arch,
            hidden_weights=np.array(record["hidden_weights"], dtype=float),
            hidden_biases=np.array(record["hidden_biases"], dtype=float),
            output_weights=np.array(record["output_weights"], dtype=float),
            output_bias=record["output_bias"],
        )
    except (KeyError, TypeError, ValueError, DataError) as exc:
        raise ReportFormatError(f"corrupt model file: {exc}") from None
