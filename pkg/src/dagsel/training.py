"""Training loop, splits, missing-data modes, optimizers, checkpoints.

Every source of randomness is seeded: the split permutation, per-epoch
shuffles (seeded by [seed, epoch]), and parameter init. Gradients within
a batch accumulate in sample-index order, so two runs with the same seed
produce identical histories bit for bit.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import FormatError, NonFiniteLossError, VersionError
from .features import FeatureConfig, FeatureStore
from .graph import Dataset, ModelZoo
from .losses import ChoiceBatch, bce_loss, cce_loss
from .model import make_scorer
from .zoos import zoo_from_obj, zoo_to_obj

OPTIMIZERS = ("sgd", "adam", "adamw")
LOSSES = ("cce", "bce")

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    hidden_d: int = 64
    lr: float = 1e-3
    weight_decay: float = 1e-4
    optimizer: str = "adamw"
    batch_size: int = 64
    scheduler_step: int = 100
    scheduler_gamma: float = 0.7
    max_epochs: int = 500
    patience: int = 50
    seed: int = 0
    loss: str = "cce"

    def __post_init__(self):
        if self.hidden_d <= 0 or self.batch_size <= 0 or self.scheduler_step <= 0:
            raise ValueError("sizes must be positive")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if not 0 < self.scheduler_gamma <= 1:
            raise ValueError("scheduler_gamma must be in (0, 1]")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")
        if self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}")
        if self.max_epochs < 0 or self.weight_decay < 0:
            raise ValueError("max_epochs and weight_decay must be nonnegative")


@dataclass(frozen=True)
class SplitSpec:
    ratios: tuple[float, float, float] = (0.6, 0.2, 0.2)
    seed: int = 0

    def __post_init__(self):
        if any(r < 0 for r in self.ratios) or abs(sum(self.ratios) - 1.0) > 1e-9:
            raise ValueError("split ratios must be nonnegative and sum to 1")


def largest_remainder(n: int, ratios: Sequence[float]) -> list[int]:
    """Integer apportionment: floors first, leftovers to largest remainders."""
    quotas = [r * n for r in ratios]
    sizes = [int(math.floor(q)) for q in quotas]
    leftover = n - sum(sizes)
    order = sorted(range(len(ratios)), key=lambda k: (-(quotas[k] - sizes[k]), k))
    for k in order[:leftover]:
        sizes[k] += 1
    return sizes


def split(dataset: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset, Dataset]:
    """Disjoint train/val/test cover at sample granularity."""
    n = dataset.n_samples
    perm = np.random.default_rng(spec.seed).permutation(n)
    n_train, n_val, _ = largest_remainder(n, spec.ratios)
    parts = (
        sorted(perm[:n_train].tolist()),
        sorted(perm[n_train : n_train + n_val].tolist()),
        sorted(perm[n_train + n_val :].tolist()),
    )
    return tuple(dataset.subset(p) for p in parts)  # type: ignore[return-value]


def apply_missing(dataset: Dataset, mode: str, ratio: float, seed: int) -> Dataset:
    """Simulate partial observation.

    mode="choices" hides a uniform fraction of the observed outcome
    entries; mode="samples" drops whole samples. ratio 0 is a no-op.
    """
    if not 0 <= ratio < 1:
        raise ValueError(f"ratio must be in [0, 1), got {ratio}")
    if mode not in ("choices", "samples"):
        raise ValueError(f"mode must be 'choices' or 'samples', got {mode!r}")
    if ratio == 0:
        return dataset
    rng = np.random.default_rng(seed)
    if mode == "samples":
        n = dataset.n_samples
        n_drop = int(round(ratio * n))
        keep = np.sort(rng.choice(n, size=n - n_drop, replace=False))
        return dataset.subset(keep.tolist())
    rows, cols = np.nonzero(dataset.observed)
    n_obs = rows.shape[0]
    n_hide = int(round(ratio * n_obs))
    hide = rng.choice(n_obs, size=n_hide, replace=False)
    observed = dataset.observed.copy()
    observed[rows[hide], cols[hide]] = False
    return Dataset(
        samples=dataset.samples,
        outcomes=dataset.outcomes.copy(),
        observed=observed,
        times=dataset.times.copy(),
    )


def step_lr(base_lr: float, epoch: int, step: int, gamma: float) -> float:
    return base_lr * gamma ** (epoch // step)


class Sgd:
    def __init__(self, weight_decay: float):
        self.weight_decay = weight_decay

    def step(self, flat: np.ndarray, grad: np.ndarray, lr: float) -> np.ndarray:
        return flat - lr * (grad + self.weight_decay * flat)


class Adam:
    """Adam with classic L2 regularization folded into the gradient."""

    def __init__(self, weight_decay: float, beta1=0.9, beta2=0.999, eps=1e-8, decoupled=False):
        self.weight_decay = weight_decay
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.decoupled = decoupled
        self.m: Optional[np.ndarray] = None
        self.v: Optional[np.ndarray] = None
        self.t = 0

    def step(self, flat: np.ndarray, grad: np.ndarray, lr: float) -> np.ndarray:
        if self.m is None:
            self.m = np.zeros_like(flat)
            self.v = np.zeros_like(flat)
        g = grad if self.decoupled else grad + self.weight_decay * flat
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * g
        self.v = self.beta2 * self.v + (1 - self.beta2) * g * g
        m_hat = self.m / (1 - self.beta1**self.t)
        v_hat = self.v / (1 - self.beta2**self.t)
        out = flat - lr * m_hat / (np.sqrt(v_hat) + self.eps)
        if self.decoupled:
            out = out - lr * self.weight_decay * flat
        return out


def make_optimizer(name: str, weight_decay: float):
    if name == "sgd":
        return Sgd(weight_decay)
    if name == "adam":
        return Adam(weight_decay)
    if name == "adamw":
        return Adam(weight_decay, decoupled=True)
    raise ValueError(f"unknown optimizer {name!r}")


@dataclass
class Checkpoint:
    kind: str
    config: TrainConfig
    feature_config: FeatureConfig
    zoo: ModelZoo
    epoch: int
    val_ser: float
    flat: np.ndarray

    def build_scorer(self):
        scorer = make_scorer(self.kind, self.zoo, self.feature_config, self.config.hidden_d, seed=0)
        scorer.set_flat(self.flat)
        return scorer


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    """Text container; float repr round-trips bit-exactly through JSON."""
    obj = {
        "format_version": CHECKPOINT_VERSION,
        "kind": ckpt.kind,
        "config": asdict(ckpt.config),
        "feature_config": asdict(ckpt.feature_config),
        "zoo": zoo_to_obj(ckpt.zoo),
        "epoch": ckpt.epoch,
        "val_ser": ckpt.val_ser,
        "params": [float(x) for x in ckpt.flat],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh)


def load_checkpoint(path) -> Checkpoint:
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as err:
        raise FormatError(f"{path}: not a valid checkpoint ({err.msg})") from None
    if not isinstance(obj, dict) or "format_version" not in obj:
        raise FormatError(f"{path}: missing format_version")
    if obj["format_version"] != CHECKPOINT_VERSION:
        raise VersionError(f"checkpoint version {obj['format_version']}, expected {CHECKPOINT_VERSION}")
    try:
        return Checkpoint(
            kind=obj["kind"],
            config=TrainConfig(**obj["config"]),
            feature_config=FeatureConfig(**obj["feature_config"]),
            zoo=zoo_from_obj(obj["zoo"]),
            epoch=obj["epoch"],
            val_ser=obj["val_ser"],
            flat=np.asarray(obj["params"], dtype=np.float64),
        )
    except (KeyError, TypeError) as err:
        raise FormatError(f"{path}: malformed checkpoint ({err})") from None


def _observed_columns(dataset: Dataset) -> list[np.ndarray]:
    return [np.nonzero(dataset.observed[i])[0] for i in range(dataset.n_samples)]


def validation_ser(scorer, dataset: Dataset, store: FeatureStore) -> float:
    """Argmax-selection success rate; unobserved selections count as failures."""
    if dataset.n_samples == 0:
        return 0.0
    all_idx = np.arange(dataset.n_choices)
    hits = 0
    for i, sample in enumerate(dataset.samples):
        logits, _ = scorer.logits(sample, store, all_idx)
        sel = int(np.argmax(logits))
        if dataset.observed[i, sel] and dataset.outcomes[i, sel] == 1:
            hits += 1
    return hits / dataset.n_samples


def train(
    train_set: Dataset,
    val_set: Dataset,
    config: TrainConfig,
    store: FeatureStore,
    zoo: ModelZoo,
    kind: str = "graph",
    d2: int = 32,
    progress: Optional[Callable[[dict], None]] = None,
) -> tuple[Checkpoint, list[dict]]:
    """Optimize a scorer on train_set, early-stopping on val_set SER.

    Returns the best-validation checkpoint and the per-epoch history.
    """
    fc = FeatureConfig(d1=store.dim, d2=d2, d=config.hidden_d)
    scorer = make_scorer(kind, zoo, fc, config.hidden_d, config.seed)
    loss_fn = cce_loss if config.loss == "cce" else bce_loss
    optimizer = make_optimizer(config.optimizer, config.weight_decay)

    obs_cols = _observed_columns(train_set)
    n = train_set.n_samples
    flat = scorer.get_flat()

    best_ser = validation_ser(scorer, val_set, store)
    best_flat = flat.copy()
    best_epoch = -1
    stale = 0
    history: list[dict] = []

    for epoch in range(config.max_epochs):
        lr = step_lr(config.lr, epoch, config.scheduler_step, config.scheduler_gamma)
        order = np.random.default_rng([config.seed, epoch]).permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            batch_rows = order[start : start + config.batch_size]
            grad = np.zeros_like(flat)
            batch_loss = 0.0
            for i in batch_rows:
                cols = obs_cols[i]
                if cols.size == 0:
                    continue
                sample = train_set.samples[i]
                logits, tape = scorer.logits(sample, store, cols)
                batch = ChoiceBatch(
                    logits=logits,
                    labels=train_set.outcomes[i, cols],
                    mask=np.ones(cols.size, dtype=bool),
                )
                loss_i, d_logits = loss_fn(batch)
                batch_loss += loss_i
                scorer.backward_into(tape, d_logits / len(batch_rows), grad)
            if not np.isfinite(batch_loss):
                raise NonFiniteLossError(
                    f"non-finite loss at epoch {epoch}, batch starting {start} "
                    f"(samples {[train_set.samples[i].sample_id for i in batch_rows]})"
                )
            epoch_loss += batch_loss
            flat = optimizer.step(flat, grad, lr)
            scorer.set_flat(flat)
        val_ser = validation_ser(scorer, val_set, store)
        record = {
            "epoch": epoch,
            "lr": lr,
            "train_loss": epoch_loss / max(n, 1),
            "val_ser": val_ser,
        }
        history.append(record)
        if progress is not None:
            progress(record)
        if val_ser > best_ser:
            best_ser = val_ser
            best_flat = flat.copy()
            best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if config.patience > 0 and stale >= config.patience:
                break

    ckpt = Checkpoint(
        kind=kind,
        config=config,
        feature_config=fc,
        zoo=zoo,
        epoch=best_epoch,
        val_ser=best_ser,
        flat=best_flat,
    )
    return ckpt, history
