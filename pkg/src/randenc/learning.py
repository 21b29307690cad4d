"""Downstream training on encoded data.

Classifiers here are deliberately small and order-invariant over patch
multisets: the set-pooling MLP averages the patch feature vectors before
any learned layer, so shuffled encoder output cannot leak order.  Training
is plain minibatch gradient descent with the adaptive per-parameter step,
fully determined by the spec seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import tensor as T
from .errors import NumericDivergenceError
from .seeds import derive_seed

DEFAULT_SPLIT = (0.6, 0.2, 0.2)
SPAM_SPLIT = (0.45, 0.45, 0.1)


@dataclass(frozen=True)
class ClassifierSpec:
    kind: str = "set_pool_mlp"  # or "logistic"
    hidden: tuple[int, ...] = (32,)
    epochs: int = 25
    lr: float = 1e-3
    weight_decay: float = 0.0
    batch_size: int = 32
    seed: int = 0
    patience: int | None = None

    def __post_init__(self):
        if self.kind not in ("set_pool_mlp", "logistic"):
            raise ValueError(f"unknown classifier kind {self.kind!r}")
        if self.epochs < 1 or self.lr <= 0 or self.batch_size < 1:
            raise ValueError("bad training hyperparameters")


class Classifier:
    """Pooled-feature MLP (or plain logistic) binary classifier."""

    def __init__(self, spec: ClassifierSpec, in_dim: int):
        self.spec = spec
        self.in_dim = int(in_dim)
        st = T.ParamStore(derive_seed(spec.seed, "classifier"))
        dims = [self.in_dim]
        if spec.kind == "set_pool_mlp":
            dims += list(spec.hidden)
        for i, (a, b) in enumerate(zip(dims[:-1], dims[1:])):
            st.gaussian(f"h{i}/w", (a, b), std=a**-0.5)
            st.zeros(f"h{i}/b", (b,))
        st.gaussian("out/w", (dims[-1], 1), std=dims[-1] ** -0.5)
        st.zeros("out/b", (1,))
        self.store = st
        self._n_hidden = len(dims) - 1

    def logits(self, features: T.Tensor) -> T.Tensor:
        x = features
        if x.data.ndim == 3:
            x = T.mean_pool(x, axis=1)  # order-invariant set pooling
        if x.data.ndim != 2:
            raise ValueError("features must be (batch, dim) or (batch, set, dim)")
        for i in range(self._n_hidden):
            x = T.relu(T.add(T.matmul(x, self.store[f"h{i}/w"]), self.store[f"h{i}/b"]))
        return T.add(T.matmul(x, self.store["out/w"]), self.store["out/b"])

    def scores(self, features: np.ndarray) -> np.ndarray:
        """Probability-scale scores for ranking: (batch,) in (0, 1)."""
        z = self.logits(T.Tensor(features)).data[:, 0]
        return 0.5 * (1.0 + np.tanh(0.5 * z))


def _bce_loss(logits: T.Tensor, labels: np.ndarray) -> T.Tensor:
    y = T.Tensor(labels.reshape(-1, 1))
    return T.mean(T.sub(T.softplus(logits), T.mul(y, logits)))


def train_classifier(
    features: np.ndarray,
    labels: np.ndarray,
    spec: ClassifierSpec,
    dev: tuple[np.ndarray, np.ndarray] | None = None,
) -> Classifier:
    """Train on labeled features; deterministic given the spec seed.

    With ``spec.patience`` and a dev set, stops after that many epochs
    without a dev-AUC improvement and restores the best parameters.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64).ravel()
    if features.shape[0] != labels.shape[0]:
        raise ValueError("one label per sample required")
    classes = np.unique(labels)
    if len(classes) < 2:
        raise ValueError("training labels are degenerate (single class)")
    model = Classifier(spec, in_dim=features.shape[-1])
    opt = T.Adam(model.store.params(), lr=spec.lr, weight_decay=spec.weight_decay)
    rng = np.random.default_rng(derive_seed(spec.seed, "batches"))
    n = features.shape[0]
    best_dev = -np.inf
    best_state = None
    bad_epochs = 0
    for epoch in range(spec.epochs):
        order = rng.permutation(n)
        for start in range(0, n, spec.batch_size):
            idx = order[start : start + spec.batch_size]
            if len(idx) < 2:
                continue
            opt.zero_grad()
            loss = _bce_loss(model.logits(T.Tensor(features[idx])), labels[idx])
            if not np.isfinite(loss.item()):
                raise NumericDivergenceError(
                    "classifier loss diverged", {"epoch": epoch}
                )
            T.backward(loss)
            opt.step()
        if dev is not None and spec.patience is not None:
            dev_auc = evaluate_auc(model, dev[0], dev[1])
            if dev_auc > best_dev + 1e-12:
                best_dev = dev_auc
                best_state = model.store.state_arrays()
                bad_epochs = 0
            else:
                bad_epochs += 1
                if bad_epochs >= spec.patience:
                    break
    if best_state is not None:
        model.store.load_state(best_state)
    return model


def auc_score(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Rank-based AUC (average ranks, so ties contribute 1/2)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).ravel()
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both classes present")
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores), dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    rank_sum = ranks[pos].sum()
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def evaluate_auc(classifier: Classifier, features: np.ndarray, labels) -> float:
    return auc_score(classifier.scores(np.asarray(features, dtype=np.float64)), labels)


# ---------------------------------------------------------------------------
# training settings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrainReport:
    setting: str
    aucs: dict
    split: tuple[float, float, float]
    seed: int
    config: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "setting": self.setting,
            "aucs": dict(self.aucs),
            "split": list(self.split),
            "seed": self.seed,
            "config": dict(self.config),
        }


def split_indices(n: int, split, seed: int):
    """Shuffled train/dev/test index split."""
    fractions = tuple(split)
    if len(fractions) != 3 or abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("split must be three fractions summing to 1")
    order = np.random.default_rng(seed).permutation(n)
    n_train = int(round(fractions[0] * n))
    n_dev = int(round(fractions[1] * n))
    return order[:n_train], order[n_train : n_train + n_dev], order[n_train + n_dev :]


def _raw_patches(images: np.ndarray, patch: int) -> np.ndarray:
    return T.patchify(T.Tensor(images), patch).data


def run_setting(
    setting: str,
    owners: Sequence[tuple[np.ndarray, np.ndarray]],
    encoder_builder: Callable[[int], object] | None,
    spec: ClassifierSpec,
    split=DEFAULT_SPLIT,
    seed: int = 0,
    raw_patch_size: int = 4,
) -> TrainReport:
    """Train under one of the collaboration settings and report test AUCs.

    ``single_owner`` trains on the first owner only.  ``combined_clear``
    encodes every owner with owner 0's encoder realization;
    ``combined_randomized`` samples an independent encoder per owner.  Each
    owner always encodes her own full published set in one batch.  With
    ``encoder_builder=None`` the classifiers see raw patches (baseline).
    """
    if setting not in ("single_owner", "combined_clear", "combined_randomized"):
        raise ValueError(f"unknown setting {setting!r}")
    if not owners:
        raise ValueError("at least one owner required")
    if setting != "single_owner" and len(owners) < 2:
        raise ValueError(f"{setting} needs at least two owners")

    use = [0] if setting == "single_owner" else list(range(len(owners)))
    encoded: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    for d in use:
        images, labels = owners[d]
        images = np.asarray(images, dtype=np.float64)
        labels = np.asarray(labels).ravel()
        if len(images) == 0:
            continue
        if encoder_builder is None:
            feats = _raw_patches(images, raw_patch_size)
        else:
            if setting == "combined_clear":
                enc_seed = derive_seed(seed, "encoder", "0")
            else:
                enc_seed = derive_seed(seed, "encoder", str(d))
            encoder = encoder_builder(enc_seed)
            feats = encoder.encode_images(
                images, shuffle_seed=derive_seed(seed, "shuffle", str(d))
            )
        encoded[d] = (feats, labels)

    train_x, train_y, dev_x, dev_y = [], [], [], []
    test_sets = {}
    for d, (feats, labels) in encoded.items():
        tr, dv, te = split_indices(len(labels), split, derive_seed(seed, "split", str(d)))
        train_x.append(feats[tr])
        train_y.append(labels[tr])
        dev_x.append(feats[dv])
        dev_y.append(labels[dv])
        test_sets[d] = (feats[te], labels[te])

    features = np.concatenate(train_x, axis=0)
    labels = np.concatenate(train_y, axis=0)
    dev = None
    if spec.patience is not None:
        dev = (np.concatenate(dev_x, axis=0), np.concatenate(dev_y, axis=0))
    model = train_classifier(features, labels, spec, dev=dev)

    aucs = {}
    for d, (fx, fy) in test_sets.items():
        aucs[f"owner{d}"] = evaluate_auc(model, fx, fy)
    aucs["average"] = float(np.mean([aucs[f"owner{d}"] for d in test_sets]))
    return TrainReport(
        setting=setting,
        aucs=aucs,
        split=tuple(split),
        seed=seed,
        config={
            "classifier": spec.kind,
            "hidden": list(spec.hidden),
            "epochs": spec.epochs,
            "owners_used": use,
            "encoded": encoder_builder is not None,
        },
    )
