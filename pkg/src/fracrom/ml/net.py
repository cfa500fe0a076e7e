"""Small fully connected network trained with mini-batch momentum SGD."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

FORMAT = "fracrom.ffnet/1"
HIDDEN = (12, 8, 4)


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int):
        super().__init__(f"divergence at epoch {epoch}")
        self.epoch = epoch


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass
class FeedforwardNet:
    """Tanh hidden layers and a single logistic or identity output unit.

    Inputs are standardized with ``x_mean``/``x_std``; identity outputs are
    mapped back through ``y_mean``/``y_std``.
    """

    sizes: tuple[int, ...]
    output: str  # "logistic" or "identity"
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    x_mean: np.ndarray = None
    x_std: np.ndarray = None
    y_mean: float = 0.0
    y_std: float = 1.0

    def __post_init__(self):
        if self.output not in ("logistic", "identity"):
            raise ValueError(f"unknown output activation {self.output!r}")
        if self.x_mean is None:
            self.x_mean = np.zeros(self.sizes[0])
        if self.x_std is None:
            self.x_std = np.ones(self.sizes[0])

    @classmethod
    def create(cls, input_dim: int, output: str, seed: int = 0,
               hidden: tuple[int, ...] = HIDDEN) -> "FeedforwardNet":
        rng = np.random.default_rng(seed)
        sizes = (input_dim, *hidden, 1)
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            scale = math.sqrt(2.0 / (fan_in + fan_out))
            weights.append(rng.normal(0.0, scale, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(sizes, output, weights, biases)

    @property
    def input_dim(self) -> int:
        return self.sizes[0]

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def copy(self) -> "FeedforwardNet":
        return FeedforwardNet(self.sizes, self.output, [w.copy() for w in self.weights],
                              [b.copy() for b in self.biases], self.x_mean.copy(),
                              self.x_std.copy(), self.y_mean, self.y_std)

    # -- evaluation ----------------------------------------------------
    def _forward(self, X: np.ndarray):
        """Raw forward pass on standardized inputs; returns output and layer cache."""
        acts = [X]
        a = X
        last = len(self.weights) - 1
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ W + b
            if k < last:
                a = np.tanh(z)
            else:
                a = _sigmoid(z) if self.output == "logistic" else z
            acts.append(a)
        return a[:, 0], acts

    def standardize(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.input_dim:
            raise ValueError(f"expected {self.input_dim} features, got {X.shape[1]}")
        return (X - self.x_mean) / self.x_std

    def predict(self, X) -> np.ndarray:
        out, _ = self._forward(self.standardize(X))
        if self.output == "identity":
            out = self.y_mean + self.y_std * out
        return out

    def __call__(self, features) -> float:
        return float(self.predict(np.asarray(features, dtype=float)[None, :])[0])

    # -- gradients -----------------------------------------------------
    def loss_and_grad(self, Xs: np.ndarray, t: np.ndarray, loss: str):
        """Mean loss and parameter gradients on standardized inputs/targets."""
        if loss == "cross_entropy" and self.output != "logistic":
            raise ValueError("cross-entropy needs a logistic output")
        out, acts = self._forward(Xs)
        n = len(t)
        if loss == "cross_entropy":
            p = np.clip(out, 1e-12, 1 - 1e-12)
            value = float(-np.mean(t * np.log(p) + (1 - t) * np.log(1 - p)))
            # logistic output + cross-entropy: dL/dz = p - t
            delta = ((out - t) / n)[:, None]
        elif loss == "squared":
            value = float(np.mean((out - t) ** 2))
            delta = (2.0 * (out - t) / n)[:, None]
        else:
            raise ValueError(f"unknown loss {loss!r}")
        if loss == "squared" and self.output == "logistic":
            delta = delta * (out * (1 - out))[:, None]

        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.weights)
        for k in range(len(self.weights) - 1, -1, -1):
            grads_w[k] = acts[k].T @ delta
            grads_b[k] = delta.sum(axis=0)
            if k > 0:
                delta = (delta @ self.weights[k].T) * (1.0 - acts[k] ** 2)
        return value, grads_w, grads_b

    # -- persistence ---------------------------------------------------
    def to_dict(self) -> dict:
        return {"format": FORMAT, "sizes": list(self.sizes), "output": self.output,
                "weights": [w.tolist() for w in self.weights],
                "biases": [b.tolist() for b in self.biases],
                "x_mean": self.x_mean.tolist(), "x_std": self.x_std.tolist(),
                "y_mean": self.y_mean, "y_std": self.y_std}

    @classmethod
    def from_dict(cls, d: dict) -> "FeedforwardNet":
        if d.get("format") != FORMAT:
            raise ValueError(f"unexpected model format {d.get('format')!r}")
        return cls(tuple(d["sizes"]), d["output"],
                   [np.asarray(w, float) for w in d["weights"]],
                   [np.asarray(b, float) for b in d["biases"]],
                   np.asarray(d["x_mean"], float), np.asarray(d["x_std"], float),
                   float(d["y_mean"]), float(d["y_std"]))


@dataclass
class TrainSchedule:
    epochs: int = 500
    batch_size: int = 32
    learning_rate: float = 0.01
    momentum: float = 0.9
    patience: int = 25
    val_fraction: float = 0.2
    seed: int = 0


@dataclass
class TrainResult:
    net: FeedforwardNet
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    best_epoch: int = 0


def nn_train(net: FeedforwardNet, X, y, loss: str = "squared",
             schedule: TrainSchedule | None = None) -> TrainResult:
    """Fit ``net`` (a copy is trained and returned).

    ``train_loss[0]`` is the loss of the untrained network. A validation
    fraction is held out for early stopping when the dataset is big enough;
    the weights with the best validation loss are kept.
    """
    schedule = schedule or TrainSchedule()
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if len(y) == 0:
        raise ValueError("empty dataset")
    if loss == "cross_entropy" and not np.all((y == 0) | (y == 1)):
        raise ValueError("cross-entropy labels must be 0 or 1")

    net = net.copy()
    rng = np.random.default_rng(schedule.seed)
    net.x_mean = X.mean(axis=0)
    std = X.std(axis=0)
    net.x_std = np.where(std > 0, std, 1.0)
    if net.output == "identity":
        net.y_mean = float(y.mean())
        net.y_std = float(y.std()) if y.std() > 0 else 1.0
    Xs = net.standardize(X)
    t = (y - net.y_mean) / net.y_std if net.output == "identity" else y

    order = rng.permutation(len(y))
    n_val = int(round(schedule.val_fraction * len(y))) if len(y) >= 10 else 0
    val_idx, train_idx = order[:n_val], order[n_val:]
    Xt, tt = Xs[train_idx], t[train_idx]
    Xv, tv = Xs[val_idx], t[val_idx]

    vel_w = [np.zeros_like(w) for w in net.weights]
    vel_b = [np.zeros_like(b) for b in net.biases]
    result = TrainResult(net)
    first, _, _ = net.loss_and_grad(Xt, tt, loss)
    result.train_loss.append(first)
    best = (math.inf, net.copy())
    stale = 0
    lr, mom = schedule.learning_rate, schedule.momentum
    for epoch in range(1, schedule.epochs + 1):
        perm = rng.permutation(len(tt))
        for start in range(0, len(perm), schedule.batch_size):
            batch = perm[start:start + schedule.batch_size]
            _, gw, gb = net.loss_and_grad(Xt[batch], tt[batch], loss)
            for k in range(len(net.weights)):
                vel_w[k] = mom * vel_w[k] - lr * gw[k]
                vel_b[k] = mom * vel_b[k] - lr * gb[k]
                net.weights[k] += vel_w[k]
                net.biases[k] += vel_b[k]
        train_value, _, _ = net.loss_and_grad(Xt, tt, loss)
        if not math.isfinite(train_value):
            raise TrainingDiverged(epoch)
        result.train_loss.append(train_value)
        monitor = train_value
        if n_val:
            monitor, _, _ = net.loss_and_grad(Xv, tv, loss)
            result.val_loss.append(monitor)
        if monitor < best[0]:
            best = (monitor, net.copy())
            result.best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if n_val and stale >= schedule.patience:
                break
    result.net = best[1]
    return result
