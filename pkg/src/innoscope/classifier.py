"""Binary cluster-membership classifier.

A single hidden layer of 100 rectified-linear units over the 14 indicators,
sigmoid output, binary cross-entropy, adaptive-moment updates at rate 0.01,
200 epochs of batch-32 training on min-max scaled features. The weights kept
are those of the epoch with the best validation loss. Training is fully
seed-deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import ScalingParams, minmax_scale
from .errors import (
    BalanceError,
    DegenerateFeatureError,
    DivergenceError,
    StratificationError,
)

PROBABILITY_FLOOR = 1e-12  # keeps probabilities strictly inside (0, 1)


@dataclass
class HyperParams:
    hidden_units: int = 100
    learning_rate: float = 0.01
    epochs: int = 200
    batch_size: int = 32
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class Splits:
    train: np.ndarray
    validation: np.ndarray
    test: np.ndarray

    @property
    def sizes(self):
        return (self.train.size, self.validation.size, self.test.size)


def make_splits(labels, ratios=(0.6, 0.2, 0.2), seed: int = 0) -> Splits:
    """Stratified train/validation/test index split.

    Within each class the train and validation counts are floors of the
    ratios; the remainder goes to test. The three parts are disjoint and
    exhaustive.
    """
    y = np.asarray(labels).astype(int)
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {ratios}")
    rng = np.random.Generator(np.random.PCG64(seed))
    parts = ([], [], [])
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        rng.shuffle(idx)
        n_train = int(ratios[0] * idx.size)
        n_val = int(ratios[1] * idx.size)
        parts[0].append(idx[:n_train])
        parts[1].append(idx[n_train:n_train + n_val])
        parts[2].append(idx[n_train + n_val:])
    splits = Splits(*(np.sort(np.concatenate(p)) for p in parts))
    for name, part in zip(("train", "validation", "test"),
                          (splits.train, splits.validation, splits.test)):
        classes = np.unique(y[part]) if part.size else np.array([])
        if classes.size < np.unique(y).size:
            raise StratificationError(
                f"{name} split lost a class; counts per class too small")
    return splits


def undersample(labels, seed: int = 0) -> np.ndarray:
    """Indices of a balanced subsample: majority class cut to minority count.

    Sampling is without replacement; the returned order is shuffled.
    """
    y = np.asarray(labels).astype(int)
    classes, counts = np.unique(y, return_counts=True)
    if classes.size < 2:
        raise BalanceError("undersampling needs both classes present")
    n_min = counts.min()
    rng = np.random.Generator(np.random.PCG64(seed))
    kept = []
    for cls in classes:
        idx = np.flatnonzero(y == cls)
        if idx.size > n_min:
            idx = rng.choice(idx, size=n_min, replace=False)
        kept.append(idx)
    out = np.concatenate(kept)
    rng.shuffle(out)
    return out


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def nn_init(n_features: int, hidden_units: int, rng: np.random.Generator) -> dict:
    """Symmetric-uniform fan-in initialization."""
    r1 = 1.0 / np.sqrt(n_features)
    r2 = 1.0 / np.sqrt(hidden_units)
    return {
        "W1": rng.uniform(-r1, r1, size=(n_features, hidden_units)),
        "b1": np.zeros(hidden_units),
        "W2": rng.uniform(-r2, r2, size=(hidden_units, 1)),
        "b2": np.zeros(1),
    }


def nn_forward(params: dict, X: np.ndarray):
    """Forward pass; returns (probabilities, cache for backprop)."""
    Z1 = X @ params["W1"] + params["b1"]
    H = np.maximum(Z1, 0.0)
    Z2 = (H @ params["W2"] + params["b2"]).ravel()
    P = _sigmoid(Z2)
    return P, {"X": X, "Z1": Z1, "H": H, "Z2": Z2}


def nn_loss(params: dict, X: np.ndarray, y: np.ndarray) -> float:
    """Mean binary cross-entropy, computed from logits for stability."""
    Z1 = X @ params["W1"] + params["b1"]
    z = (np.maximum(Z1, 0.0) @ params["W2"] + params["b2"]).ravel()
    # log(1+e^-z) stable form: max(z,0) - z*y + log(1+e^-|z|)
    return float(np.mean(np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))))


def nn_gradients(params: dict, X: np.ndarray, y: np.ndarray):
    """Analytic gradients of the mean BCE loss for every weight and bias."""
    P, cache = nn_forward(params, X)
    n = X.shape[0]
    dZ2 = (P - y) / n
    dW2 = cache["H"].T @ dZ2[:, None]
    db2 = np.array([dZ2.sum()])
    dH = dZ2[:, None] @ params["W2"].T
    dZ1 = dH * (cache["Z1"] > 0.0)
    dW1 = X.T @ dZ1
    db1 = dZ1.sum(axis=0)
    return {"W1": dW1, "b1": db1, "W2": dW2, "b2": db2}


@dataclass
class MembershipClassifier:
    """Trained network plus the feature scaling fitted on its training rows."""

    target_cluster: str
    scaling: ScalingParams
    params: dict
    threshold: float = 0.5
    train_meta: dict = field(default_factory=dict)

    def predict_proba(self, raw_rows: np.ndarray) -> np.ndarray:
        """Membership probability for rows in original indicator units."""
        raw = np.atleast_2d(np.asarray(raw_rows, dtype=float))
        if not np.all(np.isfinite(raw)):
            raise ValueError("inputs must be finite")
        scaled, _ = minmax_scale(raw, self.scaling)
        p, _ = nn_forward(self.params, scaled)
        return np.clip(p, PROBABILITY_FLOOR, 1.0 - PROBABILITY_FLOOR)

    def classify(self, raw_rows: np.ndarray) -> np.ndarray:
        return (self.predict_proba(raw_rows) > self.threshold).astype(int)

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "architecture": {
                "inputs": int(self.params["W1"].shape[0]),
                "hidden_units": int(self.params["W1"].shape[1]),
                "hidden_activation": "relu",
                "output_activation": "sigmoid",
            },
            "target_cluster": self.target_cluster,
            "threshold": self.threshold,
            "scaling": {
                "minimum": self.scaling.minimum.tolist(),
                "maximum": self.scaling.maximum.tolist(),
                "feature_names": list(self.scaling.feature_names),
            },
            "weights": {k: v.tolist() for k, v in self.params.items()},
            "train_meta": self.train_meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MembershipClassifier":
        scaling = ScalingParams(
            np.array(d["scaling"]["minimum"], dtype=float),
            np.array(d["scaling"]["maximum"], dtype=float),
            tuple(d["scaling"]["feature_names"]),
        )
        params = {k: np.array(v, dtype=float) for k, v in d["weights"].items()}
        return cls(d["target_cluster"], scaling, params,
                   float(d["threshold"]), dict(d["train_meta"]))


def train(train_xy, validation_xy, target_cluster: str = "Innovation leader",
          hyperparams: HyperParams | None = None, seed: int = 0
          ) -> MembershipClassifier:
    """Train the membership network; keeps the best-validation-loss epoch.

    train_xy/validation_xy are (raw features, binary labels). Min-max scaling
    is fitted on the training features only; a constant training feature is a
    DegenerateFeatureError (nothing can be learned from it and the scaler has
    no valid range).
    """
    hp = hyperparams or HyperParams()
    X_raw, y = np.asarray(train_xy[0], dtype=float), np.asarray(train_xy[1], dtype=float)
    Xv_raw, yv = (np.asarray(validation_xy[0], dtype=float),
                  np.asarray(validation_xy[1], dtype=float))
    X, scaling = minmax_scale(X_raw)
    Xv, _ = minmax_scale(Xv_raw, scaling)

    rng = np.random.Generator(np.random.PCG64(seed))
    params = nn_init(X.shape[1], hp.hidden_units, rng)
    m = {k: np.zeros_like(v) for k, v in params.items()}
    v = {k: np.zeros_like(v) for k, v in params.items()}
    step = 0
    best_val = np.inf
    best_params = {k: p.copy() for k, p in params.items()}
    best_epoch = 0
    n = X.shape[0]
    for epoch in range(1, hp.epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, hp.batch_size):
            batch = order[start:start + hp.batch_size]
            grads = nn_gradients(params, X[batch], y[batch])
            step += 1
            for key in params:
                m[key] = hp.beta1 * m[key] + (1 - hp.beta1) * grads[key]
                v[key] = hp.beta2 * v[key] + (1 - hp.beta2) * grads[key] ** 2
                m_hat = m[key] / (1 - hp.beta1 ** step)
                v_hat = v[key] / (1 - hp.beta2 ** step)
                params[key] = params[key] - hp.learning_rate * m_hat / (
                    np.sqrt(v_hat) + hp.epsilon)
        val_loss = nn_loss(params, Xv, yv)
        if not np.isfinite(val_loss):
            raise DivergenceError(f"non-finite validation loss at epoch {epoch}",
                                  epoch=epoch)
        if val_loss < best_val:
            best_val = val_loss
            best_params = {k: p.copy() for k, p in params.items()}
            best_epoch = epoch
    return MembershipClassifier(
        target_cluster=target_cluster,
        scaling=scaling,
        params=best_params,
        threshold=0.5,
        train_meta={
            "seed": seed,
            "best_epoch": best_epoch,
            "best_validation_loss": best_val,
            "train_size": int(n),
            "validation_size": int(Xv.shape[0]),
            **hp.to_dict(),
        },
    )


@dataclass
class EvaluationReport:
    """Threshold-0.5 confusion counts with the derived test metrics."""

    tp: int
    fp: int
    tn: int
    fn: int
    flags: list = field(default_factory=list)

    @property
    def total(self):
        return self.tp + self.fp + self.tn + self.fn

    @property
    def accuracy(self):
        return (self.tp + self.tn) / self.total if self.total else 0.0

    def precision(self, cls: int = 1) -> float:
        if cls == 1:
            denom = self.tp + self.fp
            return self.tp / denom if denom else 0.0
        denom = self.tn + self.fn
        return self.tn / denom if denom else 0.0

    def recall(self, cls: int = 1) -> float:
        if cls == 1:
            denom = self.tp + self.fn
            return self.tp / denom if denom else 0.0
        denom = self.tn + self.fp
        return self.tn / denom if denom else 0.0

    def to_dict(self):
        return {
            "confusion": {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn},
            "accuracy": self.accuracy,
            "precision": {"0": self.precision(0), "1": self.precision(1)},
            "recall": {"0": self.recall(0), "1": self.recall(1)},
            "total": self.total,
            "flags": list(self.flags),
        }


def evaluate(model: MembershipClassifier, X_raw, y) -> EvaluationReport:
    """Confusion counts and metrics on labeled rows at the model threshold."""
    y = np.asarray(y).astype(int)
    pred = model.classify(np.asarray(X_raw, dtype=float))
    tp = int(np.sum((pred == 1) & (y == 1)))
    fp = int(np.sum((pred == 1) & (y == 0)))
    tn = int(np.sum((pred == 0) & (y == 0)))
    fn = int(np.sum((pred == 0) & (y == 1)))
    flags = []
    if tp + fn == 0:
        flags.append("no positive examples in test set; class-1 recall reported as 0")
    if tp + fp == 0:
        flags.append("no positive predictions; class-1 precision reported as 0")
    return EvaluationReport(tp, fp, tn, fn, flags)


@dataclass
class BinaryTask:
    """A labeling to compare: raw features and the binary target over them."""

    name: str
    features: np.ndarray
    labels: np.ndarray


def run_protocol(task: BinaryTask, seed: int = 0,
                 hyperparams: HyperParams | None = None):
    """Split, undersample, train and evaluate one labeling.

    Returns (classifier, report, splits). This is the shared protocol used
    for every labeling in a comparison run.
    """
    splits = make_splits(task.labels, seed=seed)
    bal = splits.train[undersample(task.labels[splits.train], seed=seed)]
    model = train(
        (task.features[bal], task.labels[bal]),
        (task.features[splits.validation], task.labels[splits.validation]),
        target_cluster=task.name, hyperparams=hyperparams, seed=seed)
    report = evaluate(model, task.features[splits.test], task.labels[splits.test])
    return model, report, splits


def compare_labelings(tasks, seed: int = 0,
                      hyperparams: HyperParams | None = None) -> dict:
    """Same train/evaluate protocol applied to each labeling; fixed seed."""
    return {task.name: run_protocol(task, seed=seed, hyperparams=hyperparams)[1]
            for task in tasks}


def gradient_check(params: dict, X: np.ndarray, y: np.ndarray,
                   step: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients."""
    analytic = nn_gradients(params, X, y)
    worst = 0.0
    for key, value in params.items():
        flat = value.ravel()
        grad_flat = analytic[key].ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = nn_loss(params, X, y)
            flat[i] = orig - step
            down = nn_loss(params, X, y)
            flat[i] = orig
            numeric = (up - down) / (2 * step)
            scale = max(abs(numeric), abs(grad_flat[i]), 1e-8)
            worst = max(worst, abs(numeric - grad_flat[i]) / scale)
    return worst


def evaluation_table(reports, delimiter: str = ",") -> str:
    """Delimiter-separated export of one or more evaluation reports."""
    import csv
    import io

    if isinstance(reports, EvaluationReport):
        reports = {"": reports}
    buf = io.StringIO()
    writer = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    writer.writerow(["labeling", "accuracy", "precision_0", "recall_0",
                     "precision_1", "recall_1", "tp", "fp", "tn", "fn"])
    for name, rep in reports.items():
        writer.writerow([name, f"{rep.accuracy:.6f}",
                         f"{rep.precision(0):.6f}", f"{rep.recall(0):.6f}",
                         f"{rep.precision(1):.6f}", f"{rep.recall(1):.6f}",
                         rep.tp, rep.fp, rep.tn, rep.fn])
    return buf.getvalue()
