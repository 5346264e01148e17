"""Desk-scale synthetic federated learning.

Logistic regression on 20-dimensional Gaussian-mixture data. A client's
efficiency theta controls its data quality: label-noise rate
(1 - theta) * 0.4 and sample count 200 * (1 + theta), so high-theta
clients are measurably more valuable to the global model.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

FEATURE_DIM = 20
CLASS_SEPARATION = 4.0  # distance between class means; Bayes accuracy ~0.977
NOISE_SCALE = 0.4
BASE_SAMPLES = 200
TEST_SAMPLES = 2000
TEST_OWNER = -1


@dataclass
class SyntheticDataset:
    features: np.ndarray  # (n, d)
    labels: np.ndarray  # (n,) values in {0, 1}
    owner: int  # client id, or TEST_OWNER for the held-out test set
    true_labels: np.ndarray | None = None  # pre-noise labels, for diagnostics

    def __post_init__(self):
        if len(self.features) < 1:
            raise ValueError("dataset must contain at least one sample")
        if len(self.labels) != len(self.features):
            raise ValueError("labels length must match feature rows")

    def __len__(self) -> int:
        return len(self.labels)


@dataclass
class ModelParams:
    weights: np.ndarray  # (d + 1,), last entry is the bias

    def copy(self) -> "ModelParams":
        return ModelParams(self.weights.copy())


def init_model(dim: int = FEATURE_DIM) -> ModelParams:
    return ModelParams(np.zeros(dim + 1))


class Aggregator(Enum):
    FEDAVG = "fedavg"
    FEDPROX = "fedprox"
    SCAFFOLD = "scaffold"


@dataclass
class AggregationConfig:
    """Local-training hyperparameters plus Scaffold control-variate state."""

    algo: Aggregator = Aggregator.FEDAVG
    local_epochs: int = 5
    learning_rate: float = 0.5
    prox_mu: float = 0.0
    # Scaffold state, zero-initialized lazily per client.
    client_variates: dict = field(default_factory=dict)
    global_variate: np.ndarray | None = None
    pending_variate_updates: list = field(default_factory=list)

    def __post_init__(self):
        if self.local_epochs < 1:
            raise ValueError("local_epochs must be a positive integer")
        if self.learning_rate < 0.0:
            raise ValueError("learning_rate must be nonnegative")
        if self.prox_mu < 0.0:
            raise ValueError("prox_mu must be nonnegative")

    def variate_for(self, client: int, dim: int) -> np.ndarray:
        if self.global_variate is None:
            self.global_variate = np.zeros(dim)
        if client not in self.client_variates:
            self.client_variates[client] = np.zeros(dim)
        return self.client_variates[client]


@dataclass(frozen=True)
class PoisonConfig:
    flip_rate: float
    target_clients: frozenset = frozenset()

    def __post_init__(self):
        if not 0.0 <= self.flip_rate <= 1.0:
            raise ValueError("flip_rate must lie in [0, 1]")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -40.0, 40.0)))


def _design(features: np.ndarray) -> np.ndarray:
    return np.hstack([features, np.ones((len(features), 1))])


def generate_population(
    n_clients: int, thetas: list[float], seed: int
) -> tuple[list[SyntheticDataset], SyntheticDataset]:
    """Generate per-client training sets plus a clean held-out test set."""
    if n_clients == 0:
        raise ValueError("n_clients must be positive")
    if len(thetas) != n_clients:
        raise ValueError("thetas length must equal n_clients")
    rng = np.random.default_rng(seed)
    direction = rng.normal(size=FEATURE_DIM)
    direction /= np.linalg.norm(direction)
    mu = (CLASS_SEPARATION / 2.0) * direction

    def draw(n: int, noise_rate: float, owner: int) -> SyntheticDataset:
        y = rng.integers(0, 2, size=n)
        x = rng.normal(size=(n, FEATURE_DIM)) + (2 * y - 1)[:, None] * mu
        flips = rng.random(n) < noise_rate
        labels = np.where(flips, 1 - y, y)
        return SyntheticDataset(x, labels, owner, true_labels=y)

    datasets = []
    for i, theta in enumerate(thetas):
        n = int(round(BASE_SAMPLES * (1.0 + theta)))
        datasets.append(draw(n, (1.0 - theta) * NOISE_SCALE, owner=i))
    test = draw(TEST_SAMPLES, 0.0, owner=TEST_OWNER)
    return datasets, test


def local_train(
    global_model: ModelParams, data: SyntheticDataset, cfg: AggregationConfig
) -> ModelParams:
    """Run local gradient-descent epochs on logistic loss.

    FedProx adds prox_mu * (w - w_global) to the gradient; Scaffold
    corrects each step with (c_global - c_i) and updates c_i afterwards
    (option-II variate update).
    """
    if len(data) == 0:
        raise ValueError("cannot train on an empty dataset")
    x = _design(data.features)
    y = data.labels.astype(float)
    w_global = global_model.weights
    w = w_global.copy()
    lr = cfg.learning_rate

    if cfg.algo is Aggregator.SCAFFOLD:
        c_i = cfg.variate_for(data.owner, len(w))
        c_global = cfg.global_variate

    for _ in range(cfg.local_epochs):
        grad = x.T @ (_sigmoid(x @ w) - y) / len(y)
        if cfg.algo is Aggregator.FEDPROX:
            grad = grad + cfg.prox_mu * (w - w_global)
        elif cfg.algo is Aggregator.SCAFFOLD:
            grad = grad + (c_global - c_i)
        w = w - lr * grad

    if cfg.algo is Aggregator.SCAFFOLD and lr > 0.0:
        c_new = c_i - cfg.global_variate + (w_global - w) / (cfg.local_epochs * lr)
        cfg.pending_variate_updates.append(c_new - c_i)
        cfg.client_variates[data.owner] = c_new
    return ModelParams(w)


def aggregate(
    models: list[ModelParams], sample_counts: list[int], cfg: AggregationConfig
) -> ModelParams:
    """Sample-count-weighted average of local models."""
    if not models:
        raise ValueError("cannot aggregate zero models")
    if len(models) != len(sample_counts):
        raise ValueError("models and sample_counts must have equal length")
    counts = np.asarray(sample_counts, dtype=float)
    stacked = np.stack([m.weights for m in models])
    merged = (counts[:, None] * stacked).sum(axis=0) / counts.sum()
    if cfg.algo is Aggregator.SCAFFOLD and cfg.pending_variate_updates:
        delta = np.mean(cfg.pending_variate_updates, axis=0)
        cfg.global_variate = cfg.global_variate + delta
        cfg.pending_variate_updates.clear()
    return ModelParams(merged)


def evaluate_accuracy(model: ModelParams, test: SyntheticDataset) -> float:
    """Fraction of correct 0/1 predictions; ties at the boundary go to class 0."""
    if len(test) == 0:
        raise ValueError("cannot evaluate on an empty test set")
    logits = _design(test.features) @ model.weights
    preds = (logits > 0.0).astype(int)
    return float(np.mean(preds == test.labels))


def realized_contribution(
    global_model: ModelParams, local_model: ModelParams, test: SyntheticDataset
) -> float:
    """Test-accuracy gap between a local model and the global model."""
    return evaluate_accuracy(local_model, test) - evaluate_accuracy(global_model, test)


def poison(data: SyntheticDataset, cfg: PoisonConfig, seed: int) -> SyntheticDataset:
    """Flip each label independently with probability cfg.flip_rate."""
    rng = np.random.default_rng(seed)
    flips = rng.random(len(data)) < cfg.flip_rate
    labels = np.where(flips, 1 - data.labels, data.labels)
    return SyntheticDataset(data.features, labels, data.owner, data.true_labels)
