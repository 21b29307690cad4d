"""Adversarial attacks on randomized encoders.

The distribution-matching attack trains a same-architecture encoder to
minimize the unbiased kernel two-sample loss between its encodings of
public data and the owner's published encodings.  Evaluation compares
encoder outputs per sample after minimum-cost bipartite matching of patch
vectors (the published patch order is shuffled), normalized by the
constant predictor that outputs the mean published encoding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import tensor as T
from .errors import NumericDivergenceError
from .kernels import KernelSpec, median_heuristic_bandwidths, mmd_loss, mmd_unbiased
from .learning import ClassifierSpec, evaluate_auc, train_classifier
from .seeds import derive_seed

LR_GRID = (1e-3, 1e-4, 1e-5)  # documented search space; single-run default
WEIGHT_DECAY_GRID = (0.0, 1e-3)


@dataclass(frozen=True)
class AttackConfig:
    epochs: int = 25
    lr: float = 1e-4
    weight_decay: float = 1e-3
    batch_size: int = 128
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.lr <= 0 or self.batch_size < 1:
            raise ValueError("bad attack hyperparameters")


@dataclass(frozen=True)
class AttackReport:
    validation_mmd: float
    loss_curve: tuple[float, ...]
    config: dict
    normalized_mse: float | None = None

    def to_json(self) -> dict:
        return {
            "validation_mmd": self.validation_mmd,
            "normalized_mse": self.normalized_mse,
            "loss_curve": list(self.loss_curve),
            "config": dict(self.config),
        }


def _as_patch_sets(encoded: np.ndarray) -> np.ndarray:
    arr = np.asarray(encoded, dtype=np.float64)
    if arr.ndim == 2:  # vector outputs: one "patch" per sample
        arr = arr[:, None, :]
    if arr.ndim != 3:
        raise ValueError("encoded samples must be (batch, dim) or (batch, set, dim)")
    return arr


def _pool_points(encoded: np.ndarray) -> np.ndarray:
    arr = _as_patch_sets(encoded)
    return arr.reshape(-1, arr.shape[-1])


def mmd_attack(
    encoded_private: np.ndarray,
    public_images: np.ndarray,
    template,
    config: AttackConfig,
):
    """Estimate the owner's encoder by distribution matching.

    ``template`` donates the architecture (the attacker knows it); the
    returned encoder minimizes the minibatch two-sample loss between its
    public encodings and the published points over the run.  The report
    carries the held-out validation discrepancy and the per-epoch loss
    curve.
    """
    z_sets = _as_patch_sets(encoded_private)
    public_images = np.asarray(public_images, dtype=np.float64)
    if len(public_images) == 0:
        raise ValueError("public dataset is empty")
    rng = np.random.default_rng(derive_seed(config.seed, "mmd-attack"))

    n_pub = len(public_images)
    n_priv = len(z_sets)
    pub_val = max(2, int(0.2 * n_pub))
    priv_val = max(1, int(0.2 * n_priv))
    pub_order = rng.permutation(n_pub)
    priv_order = rng.permutation(n_priv)
    pub_train, pub_hold = pub_order[pub_val:], pub_order[:pub_val]
    priv_train, priv_hold = priv_order[priv_val:], priv_order[:priv_val]

    theta = template.clone_architecture(derive_seed(config.seed, "theta-init"))
    z_train_points = z_sets[priv_train].reshape(-1, z_sets.shape[-1])
    z_hold_points = z_sets[priv_hold].reshape(-1, z_sets.shape[-1])

    probe = min(len(z_train_points), 256)
    kernel = median_heuristic_bandwidths(z_train_points[:probe])

    opt = T.Adam(theta.store.params(), lr=config.lr, weight_decay=config.weight_decay)
    curve = []
    batch = min(config.batch_size, len(pub_train))
    for epoch in range(config.epochs):
        order = rng.permutation(pub_train)
        losses = []
        for start in range(0, len(order), batch):
            idx = order[start : start + batch]
            if len(idx) < 2:
                continue
            z_star = theta.forward(T.Tensor(public_images[idx]))
            z_star = T.reshape(z_star, (-1, z_star.shape[-1]))
            take = rng.choice(len(z_train_points), size=z_star.shape[0], replace=True)
            loss = mmd_loss(z_star, T.Tensor(z_train_points[take]), kernel)
            value = loss.item()
            if not np.isfinite(value):
                raise NumericDivergenceError(
                    "distribution-matching loss diverged",
                    {"epoch": epoch, "step": start // batch, "loss": value},
                )
            opt.zero_grad()
            T.backward(loss)
            opt.step()
            losses.append(value)
        curve.append(float(np.mean(losses)) if losses else float("nan"))

    z_star_hold = theta.forward(T.Tensor(public_images[pub_hold])).data
    val = mmd_unbiased(
        z_star_hold.reshape(-1, z_star_hold.shape[-1]), z_hold_points, kernel
    )
    report = AttackReport(
        validation_mmd=float(val),
        loss_curve=tuple(curve),
        config={
            "epochs": config.epochs,
            "lr": config.lr,
            "weight_decay": config.weight_decay,
            "batch_size": config.batch_size,
            "seed": config.seed,
            "bandwidths": list(kernel.bandwidths),
            "architecture": type(template).__name__,
            "lr_grid": list(LR_GRID),
            "weight_decay_grid": list(WEIGHT_DECAY_GRID),
        },
    )
    return theta, report


def _matched_mse(pred_sets: np.ndarray, true_sets: np.ndarray) -> float:
    """Mean squared error after per-sample minimum-cost patch matching."""
    from scipy.spatial.distance import cdist

    total = 0.0
    n, p, h = pred_sets.shape
    for i in range(n):
        cost = cdist(pred_sets[i], true_sets[i], "sqeuclidean")
        rows, cols = linear_sum_assignment(cost)
        total += cost[rows, cols].sum() / (p * h)
    return total / n


def mean_encoded_sample(encoded: np.ndarray) -> np.ndarray:
    """Average encoded sample as a patch multiset.

    Aligns every sample's patch set to the first sample by minimum-cost
    matching, then averages per aligned slot.  This is the natural
    constant predictor for shuffled patch outputs: it keeps whatever
    per-sample structure is common to all encodings (for single-vector
    outputs it reduces to the plain mean).
    """
    from scipy.spatial.distance import cdist

    sets = _as_patch_sets(encoded)
    ref = sets[0]
    acc = np.zeros_like(ref)
    for i in range(len(sets)):
        cost = cdist(ref, sets[i], "sqeuclidean")
        rows, cols = linear_sum_assignment(cost)
        acc[rows] += sets[i][cols]
    return acc / len(sets)


def normalized_mse(
    estimated,
    true_encoder,
    heldout_images: np.ndarray,
    reference_encoded: np.ndarray | None = None,
    seed: int = 0,
) -> float:
    """Recovery error of an estimated encoder on held-out samples.

    The error is the matched MSE between estimated and true encodings,
    divided by the matched MSE of the constant predictor that outputs the
    average published encoded sample (``reference_encoded`` if given, else
    the true encodings of the held-out set).
    """
    heldout_images = np.asarray(heldout_images, dtype=np.float64)
    if len(heldout_images) == 0:
        raise ValueError("held-out set is empty")
    true_sets = _as_patch_sets(
        true_encoder.encode_images(heldout_images, shuffle_seed=derive_seed(seed, "true"))
    )
    pred_sets = _as_patch_sets(
        estimated.encode_images(heldout_images, shuffle_seed=derive_seed(seed, "est"))
    )
    if reference_encoded is None:
        naive = mean_encoded_sample(true_sets)
    else:
        naive = mean_encoded_sample(reference_encoded)
    naive_sets = np.broadcast_to(naive, pred_sets.shape)
    mse_est = _matched_mse(pred_sets, true_sets)
    mse_naive = _matched_mse(naive_sets, true_sets)
    return mse_est / mse_naive


def sensitive_feature_attack(
    estimated,
    public_images: np.ndarray,
    public_sensitive: np.ndarray,
    encoded_private: np.ndarray,
    private_sensitive: np.ndarray,
    classifier_spec: ClassifierSpec | None = None,
    seed: int = 0,
) -> tuple[float, float]:
    """Train a sensitive-attribute probe on estimated encodings.

    Returns (AUC on held-out public encodings, AUC on the owner's real
    published encodings).  The second number is the attack result; the
    first is a sanity ceiling.
    """
    public_sensitive = np.asarray(public_sensitive).ravel()
    private_sensitive = np.asarray(private_sensitive).ravel()
    for s in (public_sensitive, private_sensitive):
        if len(np.unique(s)) < 2:
            raise ValueError("sensitive attribute must have both classes present")
    if classifier_spec is None:
        classifier_spec = ClassifierSpec(seed=derive_seed(seed, "probe"))
    rng = np.random.default_rng(derive_seed(seed, "sensitive-split"))
    n = len(public_images)
    order = rng.permutation(n)
    n_hold = max(2, int(0.25 * n))
    hold, train = order[:n_hold], order[n_hold:]

    feats = estimated.encode_images(
        np.asarray(public_images, dtype=np.float64),
        shuffle_seed=derive_seed(seed, "probe-shuffle"),
    )
    model = train_classifier(feats[train], public_sensitive[train], classifier_spec)
    auc_zstar = evaluate_auc(model, feats[hold], public_sensitive[hold])
    auc_z = evaluate_auc(model, _as_patch_sets(encoded_private), private_sensitive)
    return float(auc_zstar), float(auc_z)
