"""End-to-end training and evaluation of the variational circuit."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import io
from .ansatz import AnsatzConfig, build_ansatz, init_params
from .decode import Normalization, make_readout, predict_maps
from .encode import amplitude_rows
from .errors import ConfigurationError, NumericError
from .metrics import MetricReport, report
from .qsim import run_batch, value_and_grad
from .qubatch import BatchConfig, BatchReadout, batch_encode, batch_partitions, lift_circuit

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 500
    initial_lr: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    decoder: str = "layer"
    scaling: str = "physics"
    batch_qubits: int = 0
    minibatch: int = 0  # samples per Adam step; 0 = all, or one lifted state with QuBatch
    train_size: int = 400
    test_size: int = 100
    ansatz: AnsatzConfig = field(default_factory=AnsatzConfig)

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigurationError("epochs must be >= 0")
        if not self.initial_lr > 0:
            raise ConfigurationError("learning rate must be positive")
        if self.decoder not in ("pixel", "layer"):
            raise ConfigurationError(f"unknown decoder {self.decoder!r}")
        if self.batch_qubits < 0:
            raise ConfigurationError("batch_qubits must be >= 0")
        if self.minibatch < 0:
            raise ConfigurationError("minibatch must be >= 0")

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in (
            "epochs", "initial_lr", "beta1", "beta2", "eps", "seed", "decoder", "scaling",
            "batch_qubits", "minibatch", "train_size", "test_size")}
        d["ansatz"] = self.ansatz.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        d["ansatz"] = AnsatzConfig.from_dict(d["ansatz"])
        return cls(**d)


def cosine_lr(epoch: int, epochs: int, initial_lr: float) -> float:
    """Learning rate for 0-based ``epoch``; anneals from ``initial_lr`` towards 0."""
    return initial_lr * (1.0 + math.cos(math.pi * epoch / epochs)) / 2.0


class Adam:
    def __init__(self, n: int, beta1=0.9, beta2=0.999, eps=1e-8):
        self.m = np.zeros(n)
        self.v = np.zeros(n)
        self.t = 0
        self.beta1, self.beta2, self.eps = beta1, beta2, eps

    def step(self, params: np.ndarray, grad: np.ndarray, lr: float) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        return params - lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass
class ScaledDataset:
    """Scaled inputs ``(N, 256)`` with labels ``(N, 8, 8)`` in m/s."""

    inputs: np.ndarray
    labels: np.ndarray
    normalization: Normalization
    n_train: int
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.inputs.shape[0] != self.labels.shape[0]:
            raise ConfigurationError("inputs and labels disagree on sample count")

    @property
    def normalized_labels(self) -> np.ndarray:
        return self.normalization.normalize(self.labels)

    def split(self, train_size: int | None = None, test_size: int | None = None):
        """``(x_train, y_train, x_test, y_test)`` with normalized labels.

        The test samples are taken from the start of the held-out range.
        """
        n_train = self.n_train if train_size is None else train_size
        n_test = self.inputs.shape[0] - self.n_train if test_size is None else test_size
        if n_train > self.n_train or self.n_train + n_test > self.inputs.shape[0]:
            raise ConfigurationError(
                f"requested {n_train}/{n_test} split exceeds dataset "
                f"({self.n_train} train, {self.inputs.shape[0] - self.n_train} test)")
        y = self.normalized_labels
        a, b = self.n_train, self.n_train + n_test
        return self.inputs[:n_train], y[:n_train], self.inputs[a:b], y[a:b]


@dataclass
class Checkpoint:
    ansatz: AnsatzConfig
    params: np.ndarray
    decoder: str
    normalization: Normalization
    batch_qubits: int = 0
    epoch: int = 0
    history: list = field(default_factory=list)
    config: TrainConfig | None = None

    def __post_init__(self):
        if self.params.size != self.ansatz.n_params:
            raise ConfigurationError(
                f"{self.params.size} parameters, ansatz needs {self.ansatz.n_params}")

    @property
    def n_params(self) -> int:
        return int(self.params.size)

    def run_metadata(self) -> dict:
        return {"Batch": 2 ** self.batch_qubits if self.batch_qubits else 0,
                "Extra Qubits": self.ansatz.n_groups * self.batch_qubits}

    def to_dict(self) -> dict:
        return {
            "version": CHECKPOINT_VERSION,
            "ansatz": self.ansatz.to_dict(),
            "n_params": self.n_params,
            "params_f64_b64": io.encode_params(self.params),
            "decoder": self.decoder,
            "normalization": self.normalization.to_dict(),
            "batch_qubits": self.batch_qubits,
            "run_metadata": self.run_metadata(),
            "epoch": self.epoch,
            "history": self.history,
            "train_config": None if self.config is None else self.config.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Checkpoint":
        if d.get("version") != CHECKPOINT_VERSION:
            raise io.FormatError(f"unsupported checkpoint version {d.get('version')}")
        ansatz = AnsatzConfig.from_dict(d["ansatz"])
        cfg = d.get("train_config")
        return cls(ansatz, io.decode_params(d["params_f64_b64"], ansatz.n_params), d["decoder"],
                   Normalization.from_dict(d["normalization"]), int(d.get("batch_qubits", 0)),
                   int(d.get("epoch", 0)), list(d.get("history", [])),
                   None if cfg is None else TrainConfig.from_dict(cfg))

    def save(self, path) -> None:
        io.write_json(path, self.to_dict())

    @classmethod
    def load(cls, path) -> "Checkpoint":
        return cls.from_dict(io.read_json(path))


def predict(checkpoint: Checkpoint, inputs) -> np.ndarray:
    """Predicted 8x8 maps in normalized units for raw input rows."""
    circuit = build_ansatz(checkpoint.ansatz)
    states = run_batch(circuit, checkpoint.params, amplitude_rows(inputs))
    probs = states.real ** 2 + states.imag ** 2
    return predict_maps(checkpoint.decoder, probs, checkpoint.normalization.pixel_scale)


def evaluate(checkpoint: Checkpoint, inputs, labels) -> MetricReport:
    """Mean MSE / SSIM against ``labels`` given in normalized units."""
    labels = np.asarray(labels, dtype=np.float64)
    if labels.ndim != 3 or labels.shape[0] != np.shape(inputs)[0]:
        raise ConfigurationError("labels must be (n_samples, N, N) matching the inputs")
    return report(predict(checkpoint, inputs), labels)


def _step_groups(config: TrainConfig, circuit, states, targets, scale) -> list:
    """``(circuit, states, readout)`` for each optimizer step of one epoch.

    Each step consumes ``minibatch`` consecutive samples (all of them when 0).
    With ``batch_qubits = N`` the samples of a step are packed ``2**N`` at a
    time into lifted states and the default step is one lifted state.
    """
    n = len(states)
    if not config.batch_qubits:
        size = config.minibatch or n
        return [(circuit, states[a:a + size],
                 make_readout(config.decoder, targets[a:a + size], scale))
                for a in range(0, n, size)]
    if config.ansatz.n_groups != 1:
        raise ConfigurationError("batched training supports single-group ansatz inputs")
    B = 2 ** config.batch_qubits
    size = config.minibatch or B
    if n % B or size % B:
        raise ConfigurationError(
            f"training size {n} and minibatch {size} must be multiples of the batch {B}")
    bcfg = BatchConfig.from_ansatz(config.ansatz, config.batch_qubits)
    lifted = lift_circuit(circuit, bcfg)
    out = []
    for a in range(0, n, size):
        chunk = range(a, min(a + size, n), B)
        amp = np.stack([batch_encode(list(states[k:k + B]), bcfg) for k in chunk])
        base = make_readout(config.decoder, targets[a:a + size], scale)
        out.append((lifted, amp, BatchReadout(base, bcfg)))
    return out


def train(dataset: ScaledDataset, config: TrainConfig = TrainConfig(),
          progress=None) -> Checkpoint:
    """Adam with cosine annealing; returns the final checkpoint with its history.

    The learning rate is updated once per epoch; within an epoch the training
    samples are visited in fixed order in steps built by :func:`_step_groups`.
    """
    x_tr, y_tr, x_te, y_te = dataset.split(config.train_size, config.test_size)
    norm = dataset.normalization
    circuit = build_ansatz(config.ansatz)
    params = init_params(config.ansatz, config.seed)
    ckpt = Checkpoint(config.ansatz, params.copy(), config.decoder, norm,
                      config.batch_qubits, 0, [], config)
    if config.epochs == 0:
        return ckpt

    states = amplitude_rows(x_tr)
    steps = _step_groups(config, circuit, states, y_tr, norm.pixel_scale)

    step_size = config.minibatch or (2 ** config.batch_qubits if config.batch_qubits
                                     else len(x_tr))
    opt = Adam(circuit.n_params, config.beta1, config.beta2, config.eps)
    for epoch in range(config.epochs):
        lr = cosine_lr(epoch, config.epochs, config.initial_lr)
        losses = []
        for g, (circ, amp, readout) in enumerate(steps):
            first = g * step_size
            where = f"epoch {epoch + 1}, samples {first}..{min(first + step_size, len(x_tr)) - 1}"
            try:
                loss, grad = value_and_grad(circ, params, amp, readout)
            except NumericError as exc:
                raise NumericError(f"{exc} at {where}") from None
            if not np.isfinite(loss):
                raise NumericError(f"non-finite loss at {where}")
            params = opt.step(params, grad, lr)
            losses.append(loss)
        train_loss = float(np.mean(losses))
        ckpt.params = params.copy()
        row = {"epoch": epoch + 1, "train_loss": train_loss}
        if len(x_te):
            m = evaluate(ckpt, x_te, y_te)
            row.update(test_mse=m.mse, test_ssim=m.ssim)
        else:
            row.update(test_mse=float("nan"), test_ssim=float("nan"))
        ckpt.history.append(row)
        ckpt.epoch = epoch + 1
        if progress is not None:
            progress(row)
    return ckpt


def batched_predictions(checkpoint: Checkpoint, inputs) -> np.ndarray:
    """Predictions obtained by running the lifted circuit on batches of inputs."""
    bq = checkpoint.batch_qubits
    B = 2 ** bq
    states = amplitude_rows(inputs)
    if len(states) % B:
        raise ConfigurationError(f"{len(states)} samples are not divisible by {B}")
    bcfg = BatchConfig.from_ansatz(checkpoint.ansatz, bq)
    lifted = lift_circuit(build_ansatz(checkpoint.ansatz), bcfg)
    out = []
    for start in range(0, len(states), B):
        amp = batch_encode(list(states[start:start + B]), bcfg)
        final = run_batch(lifted, checkpoint.params, amp)[0]
        parts = batch_partitions(final.real ** 2 + final.imag ** 2, bcfg)
        out.append(predict_maps(checkpoint.decoder, parts, checkpoint.normalization.pixel_scale))
    return np.concatenate(out)
