"""Adam training loop and subject-aware nested cross-validation search.

Determinism contract: everything stochastic (shuffling, dropout masks) flows
from the config seed through one np.random.Generator, so identical inputs
and config reproduce bit-identical parameters.
"""

from __future__ import annotations

import dataclasses
import itertools
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from ..signal_io import Window
from .evaluate import confusion_matrix, classification_report, weighted_f1, windows_to_arrays
from .network import Network, make_default_network


class DivergedTraining(Exception):
    """Loss became non-finite; the run is unrecoverable."""


class InsufficientData(Exception):
    """Too few subjects to build the requested folds."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 3e-4
    dropout_rate: float = 0.5
    epochs: int = 50
    batch_size: int = 32
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    early_stopping_patience: int | None = 10

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_loss: float
    train_accuracy: float
    val_loss: float
    val_accuracy: float
    val_weighted_f1: float


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy and its gradient w.r.t. the logits."""
    z = logits - logits.max(axis=1, keepdims=True)
    log_probs = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    n = logits.shape[0]
    loss = -float(log_probs[np.arange(n), labels].mean())
    dlogits = np.exp(log_probs)
    dlogits[np.arange(n), labels] -= 1.0
    return loss, dlogits / n


class Adam:
    """Moment-tracking optimizer updating network parameters in place."""

    def __init__(self, net: Network, config: TrainConfig):
        self.net = net
        self.cfg = config
        self.t = 0
        self.m = {key: np.zeros_like(arr) for key, arr in self._iter(net)}
        self.v = {key: np.zeros_like(arr) for key, arr in self._iter(net)}

    @staticmethod
    def _iter(net: Network):
        for i, name, arr in net.parameters():
            yield (i, name), arr

    def step(self, param_grads: list[dict[str, np.ndarray]]) -> None:
        cfg = self.cfg
        self.t += 1
        b1t = 1.0 - cfg.beta1 ** self.t
        b2t = 1.0 - cfg.beta2 ** self.t
        for (i, name), arr in self._iter(self.net):
            g = param_grads[i][name]
            key = (i, name)
            self.m[key] = cfg.beta1 * self.m[key] + (1 - cfg.beta1) * g
            self.v[key] = cfg.beta2 * self.v[key] + (1 - cfg.beta2) * g * g
            m_hat = self.m[key] / b1t
            v_hat = self.v[key] / b2t
            arr -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon)
        self.net.bump_version()


def _dataset_scores(net: Network, x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    from .evaluate import predict_batch

    logits = predict_batch(net, x)
    loss, _ = cross_entropy(logits, y)
    pred = logits.argmax(axis=1)
    acc = float((pred == y).mean())
    f1 = classification_report(confusion_matrix(y, pred)).weighted_f1
    return loss, acc, f1


def train(net: Network, train_windows: Sequence[Window], val_windows: Sequence[Window],
          config: TrainConfig = TrainConfig()) -> tuple[Network, list[EpochStats]]:
    """Fit in place with Adam; early-stops on validation weighted F1.

    The best-scoring parameters are restored at the end, so the returned
    network reflects the best epoch rather than the last one.
    """
    if not train_windows or not val_windows:
        raise InsufficientData("train and validation sets must be non-empty")
    x_train, y_train = windows_to_arrays(train_windows)
    x_val, y_val = windows_to_arrays(val_windows)
    if y_train is None or y_val is None:
        raise ValueError("training requires labeled windows")

    rng = np.random.default_rng(config.seed)
    optimizer = Adam(net, config)
    history: list[EpochStats] = []
    best_f1 = -np.inf
    best_state = net.get_state()
    best_epoch = 0
    since_best = 0

    n = x_train.shape[0]
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            logits, trace = net.forward_batch(x_train[idx], train=True, rng=rng)
            loss, dlogits = cross_entropy(logits, y_train[idx])
            if not np.isfinite(loss):
                raise DivergedTraining(f"non-finite loss at epoch {epoch}")
            grads = net.backward_loss(trace, dlogits)
            optimizer.step(grads)

        train_loss, train_acc, _ = _dataset_scores(net, x_train, y_train)
        val_loss, val_acc, val_f1 = _dataset_scores(net, x_val, y_val)
        if not (np.isfinite(train_loss) and np.isfinite(val_loss)):
            raise DivergedTraining(f"non-finite loss at epoch {epoch}")
        history.append(EpochStats(epoch, train_loss, train_acc, val_loss, val_acc, val_f1))

        if val_f1 > best_f1:
            best_f1 = val_f1
            best_state = net.get_state()
            best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
            patience = config.early_stopping_patience
            if patience is not None and since_best >= patience:
                break

    if best_epoch and best_epoch != history[-1].epoch:
        net.set_state(best_state)
    return net, history


NetworkFactory = Callable[[TrainConfig], Network]


def default_network_factory(config: TrainConfig) -> Network:
    return make_default_network(dropout_rate=config.dropout_rate, seed=config.seed)


@dataclass(frozen=True)
class GridSearchResult:
    best_config: TrainConfig
    configs: tuple[TrainConfig, ...]
    # inner_scores[c][k] = mean inner-fold validation F1 of config c on outer fold k
    inner_scores: tuple[tuple[float, ...], ...]
    outer_scores: tuple[float, ...]
    outer_subject_folds: tuple[tuple[str, ...], ...]


def _expand_grid(base: TrainConfig, grid: Mapping[str, Sequence]) -> list[TrainConfig]:
    keys = list(grid)
    configs = []
    for combo in itertools.product(*(grid[k] for k in keys)):
        configs.append(dataclasses.replace(base, **dict(zip(keys, combo))))
    return configs


def _subject_table(windows: Sequence[Window]) -> dict[str, list[Window]]:
    table: dict[str, list[Window]] = {}
    for w in windows:
        table.setdefault(w.source_id, []).append(w)
    return table


def _gather(table: dict[str, list[Window]], subjects: Sequence[str]) -> list[Window]:
    out: list[Window] = []
    for s in subjects:
        out.extend(table[s])
    return out


def grid_search(
    windows: Sequence[Window],
    grid: Mapping[str, Sequence],
    base_config: TrainConfig = TrainConfig(),
    outer_folds: int = 5,
    inner_folds: int = 3,
    seed: int = 0,
    network_factory: NetworkFactory = default_network_factory,
) -> GridSearchResult:
    """Nested cross-validation on subject-disjoint folds.

    The winning config maximizes the mean inner-fold validation weighted F1
    across all outer folds; outer_scores then report its held-out
    generalization, trained once per outer fold on that fold's complement.
    """
    configs = _expand_grid(base_config, grid)
    if not configs:
        raise ValueError("empty hyperparameter grid")
    table = _subject_table(windows)
    subjects = sorted(table)
    if len(subjects) < outer_folds:
        raise InsufficientData(f"{len(subjects)} subjects cannot fill {outer_folds} outer folds")

    rng = np.random.default_rng(seed)
    shuffled = [subjects[i] for i in rng.permutation(len(subjects))]
    outer = [list(part) for part in np.array_split(np.array(shuffled, dtype=object), outer_folds)]
    for fold in outer:
        if len(shuffled) - len(fold) < inner_folds:
            raise InsufficientData("not enough subjects left for the inner folds")

    inner_scores = [[0.0] * outer_folds for _ in configs]
    for k, held in enumerate(outer):
        rest = [s for s in shuffled if s not in held]
        inner = [list(p) for p in np.array_split(np.array(rest, dtype=object), inner_folds)]
        for c, cfg in enumerate(configs):
            fold_scores = []
            for j, val_subjects in enumerate(inner):
                train_subjects = [s for s in rest if s not in val_subjects]
                net = network_factory(cfg)
                _, history = train(net, _gather(table, train_subjects),
                                   _gather(table, val_subjects), cfg)
                fold_scores.append(max(h.val_weighted_f1 for h in history))
            inner_scores[c][k] = float(np.mean(fold_scores))

    means = [float(np.mean(s)) for s in inner_scores]
    best_idx = int(np.argmax(means))
    best = configs[best_idx]

    from .evaluate import evaluate_windows

    outer_scores = []
    for k, held in enumerate(outer):
        rest = [s for s in shuffled if s not in held]
        # one inner slice of the training side monitors early stopping, so the
        # held-out fold stays untouched until scoring
        monitor = list(np.array_split(np.array(rest, dtype=object), inner_folds)[0])
        fit_subjects = [s for s in rest if s not in monitor]
        net = network_factory(best)
        train(net, _gather(table, fit_subjects), _gather(table, monitor), best)
        report, _, _ = evaluate_windows(net, _gather(table, held))
        outer_scores.append(report.weighted_f1)

    return GridSearchResult(
        best_config=best,
        configs=tuple(configs),
        inner_scores=tuple(tuple(s) for s in inner_scores),
        outer_scores=tuple(outer_scores),
        outer_subject_folds=tuple(tuple(f) for f in outer),
    )
