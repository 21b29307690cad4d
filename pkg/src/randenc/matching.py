"""Re-identification of plaintext/ciphertext pairs, then key recovery.

The matching model scores (raw sample, encoded sample) pairs; it is
trained on freshly drawn encoders every iteration, so it learns what
survives the whole encoder family rather than any one key.  Matched pairs
then drive a plaintext attack: gradient descent on a candidate encoder's
weights to reproduce the observed encodings.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from . import tensor as T
from .errors import NumericDivergenceError
from .learning import auc_score
from .seeds import derive_seed


@dataclass(frozen=True)
class MatchingConfig:
    iterations: int = 150
    lr: float = 1e-3
    embed_dim: int = 16
    hidden: int = 32
    seed: int = 0


def _pool_stats(sets: np.ndarray) -> np.ndarray:
    """Order-invariant per-sample summary: mean and std over the set axis."""
    return np.concatenate([sets.mean(axis=1), sets.std(axis=1)], axis=1)


def _patch_stats(images: np.ndarray, patch: int) -> np.ndarray:
    patches = T.patchify(T.Tensor(images), patch).data
    return _pool_stats(patches)


class MatchingModel:
    """Similarity scorer between raw samples and encoded sample sets."""

    def __init__(self, patch_size: int, plain_dim: int, cipher_dim: int, config: MatchingConfig):
        self.patch_size = patch_size
        self.config = config
        st = T.ParamStore(derive_seed(config.seed, "matcher"))
        h, e = config.hidden, config.embed_dim
        st.gaussian("plain/w1", (plain_dim, h), std=plain_dim**-0.5)
        st.zeros("plain/b1", (h,))
        st.gaussian("plain/w2", (h, e), std=h**-0.5)
        st.zeros("plain/b2", (e,))
        st.gaussian("cipher/w1", (cipher_dim, h), std=cipher_dim**-0.5)
        st.zeros("cipher/b1", (h,))
        st.gaussian("cipher/w2", (h, e), std=h**-0.5)
        st.zeros("cipher/b2", (e,))
        self.store = st

    def _embed(self, side: str, feats: T.Tensor) -> T.Tensor:
        st = self.store
        x = T.relu(T.add(T.matmul(feats, st[f"{side}/w1"]), st[f"{side}/b1"]))
        return T.add(T.matmul(x, st[f"{side}/w2"]), st[f"{side}/b2"])

    def score_graph(self, plain_feats: np.ndarray, cipher_feats: np.ndarray) -> T.Tensor:
        ex = self._embed("plain", T.Tensor(plain_feats))
        ez = self._embed("cipher", T.Tensor(cipher_feats))
        return T.matmul(ex, T.transpose(ez, (1, 0)))

    def scores(self, images: np.ndarray, encoded_sets: np.ndarray) -> np.ndarray:
        plain = _patch_stats(np.asarray(images, dtype=np.float64), self.patch_size)
        cipher = _pool_stats(np.asarray(encoded_sets, dtype=np.float64))
        return self.score_graph(plain, cipher).data


def matching_model_train(
    owner_images: np.ndarray,
    family_sampler,
    config: MatchingConfig,
    patch_size: int,
):
    """Train the pair scorer over freshly sampled encoders.

    ``family_sampler(seed)`` must return a new encoder drawn from the
    scheme.  Every iteration encodes the owner's full set with a fresh
    draw and pushes matched pairs up, mismatched pairs down (in-batch
    negatives).  Returns (model, per-iteration loss curve).
    """
    images = np.asarray(owner_images, dtype=np.float64)
    n = len(images)
    if n < 2:
        raise ValueError("matching needs at least two samples to form mismatched pairs")
    plain = _patch_stats(images, patch_size)
    probe = family_sampler(derive_seed(config.seed, "probe"))
    probe_sets = probe.encode_images(images, shuffle_seed=0)
    model = MatchingModel(
        patch_size=patch_size,
        plain_dim=plain.shape[1],
        cipher_dim=2 * probe_sets.shape[-1],
        config=config,
    )
    opt = T.Adam(model.store.params(), lr=config.lr)
    eye = np.eye(n)
    curve = []
    for it in range(config.iterations):
        enc = family_sampler(derive_seed(config.seed, "enc", str(it)))
        sets = enc.encode_images(images, shuffle_seed=derive_seed(config.seed, "shuf", str(it)))
        cipher = _pool_stats(sets)
        logits = model.score_graph(plain, cipher)
        y = T.Tensor(eye)
        loss = T.mean(T.sub(T.softplus(logits), T.mul(y, logits)))
        value = loss.item()
        if not np.isfinite(value):
            raise NumericDivergenceError("matching loss diverged", {"iteration": it})
        opt.zero_grad()
        T.backward(loss)
        opt.step()
        curve.append(value)
    return model, tuple(curve)


def matching_auc(model: MatchingModel, images: np.ndarray, encoded_sets: np.ndarray) -> float:
    """AUC of matched versus mismatched pair scores on a fresh encoder."""
    s = model.scores(images, encoded_sets)
    n = s.shape[0]
    labels = np.eye(n, dtype=int).ravel()
    return auc_score(s.ravel(), labels)


def match_pairs(model: MatchingModel, images: np.ndarray, encoded_sets: np.ndarray) -> np.ndarray:
    """Assignment of encoded sets to raw samples maximizing total score.

    Returns ``perm`` with ``encoded_sets[perm[i]]`` paired to sample i.
    """
    s = model.scores(images, encoded_sets)
    rows, cols = linear_sum_assignment(-s)
    out = np.empty(len(images), dtype=np.int64)
    out[rows] = cols
    return out


@dataclass(frozen=True)
class PlaintextConfig:
    epochs: int = 300
    lr: float = 1e-2
    seed: int = 0
    val_fraction: float = 0.25


def _aligned_targets(pred: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Per-sample reorder of target patch rows to best match predictions."""
    out = np.empty_like(targets)
    for i in range(len(targets)):
        cost = cdist(pred[i], targets[i], "sqeuclidean")
        rows, cols = linear_sum_assignment(cost)
        out[i, rows] = targets[i, cols]
    return out


def plaintext_attack(
    images: np.ndarray,
    encoded_targets: np.ndarray,
    template,
    config: PlaintextConfig,
):
    """Recover an encoder from matched (raw, encoded) pairs.

    Trains a fresh same-architecture candidate to reproduce the encodings;
    patch order is realigned (minimum-cost matching) as the candidate
    improves.  Returns (recovered encoder, report dict) where the report
    carries held-out MSE and the ratio to a fresh random encoder's MSE.
    """
    images = np.asarray(images, dtype=np.float64)
    targets = np.asarray(encoded_targets, dtype=np.float64)
    if targets.ndim == 2:
        targets = targets[:, None, :]
    if len(images) == 0:
        raise ValueError("need at least one matched pair")
    n = len(images)
    rng = np.random.default_rng(derive_seed(config.seed, "plaintext"))
    order = rng.permutation(n)
    n_val = max(1, int(config.val_fraction * n)) if n > 1 else 0
    val_idx, train_idx = order[:n_val], order[n_val:]

    candidate = template.clone_architecture(derive_seed(config.seed, "candidate"))
    opt = T.Adam(candidate.store.params(), lr=config.lr)

    for epoch in range(config.epochs):
        # forward on the full set keeps normalization statistics identical
        # to the published encoding batch
        out = candidate.forward(T.Tensor(images))
        aligned = _aligned_targets(out.data, targets)
        diff = T.sub(out, T.Tensor(aligned))
        sq = T.mul(diff, diff)
        mask = np.zeros((n, 1, 1))
        mask[train_idx] = 1.0
        loss = T.scale(
            T.sum_(T.mul(sq, T.Tensor(mask))),
            1.0 / max(1, len(train_idx) * targets.shape[1] * targets.shape[2]),
        )
        value = loss.item()
        if not np.isfinite(value):
            raise NumericDivergenceError("plaintext loss diverged", {"epoch": epoch})
        opt.zero_grad()
        T.backward(loss)
        opt.step()

    def eval_mse(encoder) -> float:
        out = encoder.forward(T.Tensor(images)).data
        aligned = _aligned_targets(out, targets)
        idx = val_idx if len(val_idx) else np.arange(n)
        d = out[idx] - aligned[idx]
        return float((d * d).mean())

    mse_val = eval_mse(candidate)
    fresh = template.clone_architecture(derive_seed(config.seed, "fresh-random"))
    mse_fresh = eval_mse(fresh)
    report = {
        "mse": mse_val,
        "random_encoder_mse": mse_fresh,
        "ratio": mse_val / mse_fresh if mse_fresh > 0 else float("inf"),
        "epochs": config.epochs,
        "lr": config.lr,
        "seed": config.seed,
        "pairs": int(n),
    }
    return candidate, report
