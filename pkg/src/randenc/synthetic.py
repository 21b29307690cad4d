"""Seeded synthetic tasks for the desk-scale directional experiments.

The image task is a mixture of well-separated prototype images ("modes")
with skewed low-rank within-mode variation.  Class and sensitive labels
are deterministic functions of the mode, the way diagnoses and attributes
ride on anatomy in real corpora.  Mode structure is what makes
distribution-matching attacks on linear encoders effective: mapping the
mode means correctly over-determines the patch map.  Purely Gaussian
blobs would leave any whitened rotation of the encoder indistinguishable,
which no real image corpus does.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .seeds import derive_seed


@dataclass(frozen=True)
class ImageTask:
    images: np.ndarray  # (n, 1, side, side)
    labels: np.ndarray  # (n,) in {0, 1}
    sensitive: np.ndarray  # (n,) in {0, 1}
    modes: np.ndarray  # (n,) mode index per sample


def make_image_task(
    n: int,
    side: int = 8,
    seed: int = 0,
    n_factors: int = 8,
    top_scale: float = 4.0,
    low_scale: float = 0.8,
    fuzz: float = 0.3,
    label_frac: float = 0.6,
    sens_frac: float = 0.65,
) -> ImageTask:
    dim = side * side
    rng_d = np.random.default_rng(derive_seed(seed, "directions"))
    base = rng_d.standard_normal(dim)
    factors = np.linalg.qr(rng_d.standard_normal((dim, n_factors)))[0].T
    scales = np.geomspace(top_scale, low_scale, n_factors)

    rng = np.random.default_rng(derive_seed(seed, "samples"))
    # skewed coefficients: the one-sided tail pins the sign of every
    # factor direction, and the steep distinct scales pin their order, so
    # a linear map of the images is identified by its pushforward alone
    coeff = (rng.exponential(1.0, size=(n, n_factors)) - 1.0) * scales[None, :]
    x = base[None, :] + coeff @ factors + fuzz * rng.standard_normal((n, dim))
    # class and sensitive labels ride on the two dominant factors, the way
    # diagnoses ride on global anatomy
    labels = (coeff[:, 0] > np.quantile(coeff[:, 0], 1 - label_frac)).astype(np.int64)
    sensitive = (coeff[:, 1] > np.quantile(coeff[:, 1], 1 - sens_frac)).astype(np.int64)
    return ImageTask(
        images=x.reshape(n, 1, side, side),
        labels=labels,
        sensitive=sensitive,
        modes=np.zeros(n, dtype=np.int64),
    )


def make_text_task(
    n: int,
    vocab_size: int = 40,
    min_len: int = 5,
    max_len: int = 12,
    seed: int = 0,
) -> tuple[list[list[int]], np.ndarray]:
    """Token sequences whose label shifts the token distribution.

    Class 1 draws tokens from the upper half of the vocabulary with higher
    probability; lengths vary uniformly.
    """
    rng = np.random.default_rng(derive_seed(seed, "text"))
    labels = rng.integers(0, 2, size=n)
    half = vocab_size // 2
    sequences = []
    for y in labels:
        length = int(rng.integers(min_len, max_len + 1))
        upper = rng.random(length) < (0.75 if y else 0.25)
        toks = np.where(
            upper,
            rng.integers(half, vocab_size, size=length),
            rng.integers(0, half, size=length),
        )
        sequences.append([int(t) for t in toks])
    return sequences, labels.astype(np.int64)
