"""Randomized neural encoders: patch CNN, recurrent text encoder, linear.

A patch encoder splits the image into non-overlapping patches and pushes
them through depth-d conv+ReLU blocks (batch normalization on all but the
final block), adds a fixed random positional embedding to the final
block's input, and emits the patch feature vectors in a freshly shuffled
order per sample, so no positional metadata leaves the encoder.

Encoders are rebuilt bit-identically from (spec, seed).  Feature
standardization uses the statistics of the batch being encoded (the data
owner encodes her whole published set at once), which makes the encoder
mildly data-dependent; ``fixed_stats=True`` switches to frozen random
statistics drawn at build time.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import tensor as T
from .seeds import derive_seed
from .tensor_io import read_tensor, write_tensor


@dataclass(frozen=True)
class PatchEncoderSpec:
    patch_size: int
    depth: int
    hidden_dim: int
    seed: int
    channels: int = 1
    image_size: tuple[int, int] = (8, 8)
    fixed_stats: bool = False

    def __post_init__(self):
        if self.patch_size < 1 or self.depth < 1 or self.hidden_dim < 1:
            raise ValueError("patch size, depth, and hidden dim must be positive")
        h, w = self.image_size
        if h % self.patch_size or w % self.patch_size:
            raise ValueError(
                f"patch size {self.patch_size} does not divide image {h}x{w}"
            )
        object.__setattr__(self, "image_size", (int(h), int(w)))

    @property
    def n_patches(self) -> int:
        h, w = self.image_size
        return (h // self.patch_size) * (w // self.patch_size)

    @property
    def patch_dim(self) -> int:
        return self.channels * self.patch_size * self.patch_size


def _shuffle_per_sample(features: np.ndarray, shuffle_seed: int) -> np.ndarray:
    """Independent uniform patch permutation per sample."""
    rng = np.random.default_rng(shuffle_seed)
    out = np.empty_like(features)
    for i in range(features.shape[0]):
        out[i] = features[i, rng.permutation(features.shape[1])]
    return out


def multiset_equal(a: np.ndarray, b: np.ndarray, tol: float = 1e-9) -> bool:
    """Row-multiset equality of two (rows, features) arrays."""
    if a.shape != b.shape:
        return False
    ka = a[np.lexsort(a.T[::-1])]
    kb = b[np.lexsort(b.T[::-1])]
    return bool(np.allclose(ka, kb, atol=tol))


class PatchEncoder:
    """Depth-d randomized patch encoder (see module docstring)."""

    kind = "patch"

    def __init__(self, spec: PatchEncoderSpec):
        self.spec = spec
        st = T.ParamStore(spec.seed)
        d, h = spec.depth, spec.hidden_dim
        in_dim = spec.patch_dim
        for j in range(1, d + 1):
            out_dim = h
            st.gaussian(f"block{j}/w", (in_dim, out_dim), std=in_dim**-0.5)
            st.zeros(f"block{j}/b", (out_dim,))
            if j < d:  # the final block is conv + ReLU only
                st.gaussian(f"block{j}/gamma", (out_dim,), mean=1.0, std=0.2)
                st.gaussian(f"block{j}/beta", (out_dim,), std=0.2)
            in_dim = out_dim
        final_in = spec.patch_dim if d == 1 else h
        st.gaussian("posemb", (spec.n_patches, final_in), std=1.0)
        self.store = st
        self._frozen_mu = {
            j: T.seeded_init((h,), ("gaussian", 0.0, 0.1), derive_seed(spec.seed, f"stats{j}"))
            for j in range(1, d)
        }

    @property
    def n_patches(self) -> int:
        return self.spec.n_patches

    @property
    def out_dim(self) -> int:
        return self.spec.hidden_dim

    def _block(self, j: int, x: T.Tensor) -> T.Tensor:
        st = self.store
        y = T.add(T.matmul(x, st[f"block{j}/w"]), st[f"block{j}/b"])
        if j < self.spec.depth:
            if self.spec.fixed_stats:
                y = T.standardize_fixed(
                    y,
                    self._frozen_mu[j],
                    np.ones(self.spec.hidden_dim),
                    st[f"block{j}/gamma"],
                    st[f"block{j}/beta"],
                )
            else:
                y = T.batch_normalize(y, st[f"block{j}/gamma"], st[f"block{j}/beta"])
        return T.relu(y)

    def forward(self, images: T.Tensor) -> T.Tensor:
        """Ordered patch features, differentiable: (B, C, H, W) -> (B, P, h)."""
        if images.data.ndim != 4:
            raise ValueError("forward expects (B, C, H, W)")
        if images.shape[2:] != self.spec.image_size or images.shape[1] != self.spec.channels:
            raise ValueError(
                f"image shape {images.shape[1:]} does not match spec "
                f"({self.spec.channels}, {self.spec.image_size})"
            )
        b = images.shape[0]
        p_count = self.n_patches
        x = T.patchify(images, self.spec.patch_size)  # (B, P, patch_dim)
        x = T.reshape(x, (b * p_count, x.shape[2]))
        d = self.spec.depth
        for j in range(1, d):
            x = self._block(j, x)
        x = T.reshape(x, (b, p_count, x.shape[1]))
        x = T.add(x, self.store["posemb"])  # broadcast over the batch axis
        x = T.reshape(x, (b * p_count, x.shape[2]))
        x = self._block(d, x)
        return T.reshape(x, (b, p_count, self.spec.hidden_dim))

    def encode_images(self, images: np.ndarray, shuffle_seed: int) -> np.ndarray:
        """Encode a batch; each sample's patch vectors are emitted in a
        fresh uniform order."""
        feats = self.forward(T.Tensor(images)).data
        return _shuffle_per_sample(feats, shuffle_seed)

    def encode_image(self, image: np.ndarray, shuffle_seed: int) -> np.ndarray:
        """Encode one image (batch statistics come from its own patches)."""
        return self.encode_images(np.asarray(image)[None], shuffle_seed)[0]

    def parameter_count(self) -> int:
        return self.store.n_parameters()

    @staticmethod
    def parameter_count_formula(spec: PatchEncoderSpec) -> int:
        """Closed form for the parameter count of a given spec."""
        d, h, pd = spec.depth, spec.hidden_dim, spec.patch_dim
        count = pd * h + h  # patchify block
        count += (d - 1) * (h * h + h)  # remaining blocks
        count += 2 * h * (d - 1)  # affine normalization on blocks 1..d-1
        count += spec.n_patches * (pd if d == 1 else h)  # positional embedding
        return count

    def clone_architecture(self, seed: int) -> "PatchEncoder":
        return PatchEncoder(
            PatchEncoderSpec(
                patch_size=self.spec.patch_size,
                depth=self.spec.depth,
                hidden_dim=self.spec.hidden_dim,
                seed=seed,
                channels=self.spec.channels,
                image_size=self.spec.image_size,
                fixed_stats=self.spec.fixed_stats,
            )
        )


def build_patch_encoder(spec: PatchEncoderSpec) -> PatchEncoder:
    return PatchEncoder(spec)


@dataclass(frozen=True)
class LinearEncoderSpec:
    patch_size: int
    out_dim: int
    seed: int
    channels: int = 1
    image_size: tuple[int, int] = (8, 8)

    def __post_init__(self):
        h, w = self.image_size
        if h % self.patch_size or w % self.patch_size:
            raise ValueError(
                f"patch size {self.patch_size} does not divide image {h}x{w}"
            )
        object.__setattr__(self, "image_size", (int(h), int(w)))

    @property
    def n_patches(self) -> int:
        h, w = self.image_size
        return (h // self.patch_size) * (w // self.patch_size)

    @property
    def patch_dim(self) -> int:
        return self.channels * self.patch_size * self.patch_size


class LinearEncoder:
    """One non-overlapping convolution, nothing else: a linear map per patch."""

    kind = "linear"

    def __init__(self, spec: LinearEncoderSpec):
        self.spec = spec
        st = T.ParamStore(spec.seed)
        st.gaussian("w", (spec.patch_dim, spec.out_dim), std=spec.patch_dim**-0.5)
        self.store = st

    @property
    def n_patches(self) -> int:
        return self.spec.n_patches

    @property
    def out_dim(self) -> int:
        return self.spec.out_dim

    def forward(self, images: T.Tensor) -> T.Tensor:
        if images.data.ndim != 4:
            raise ValueError("forward expects (B, C, H, W)")
        b = images.shape[0]
        x = T.patchify(images, self.spec.patch_size)
        x = T.reshape(x, (b * self.n_patches, self.spec.patch_dim))
        x = T.matmul(x, self.store["w"])
        return T.reshape(x, (b, self.n_patches, self.spec.out_dim))

    def encode_images(self, images: np.ndarray, shuffle_seed: int) -> np.ndarray:
        feats = self.forward(T.Tensor(images)).data
        return _shuffle_per_sample(feats, shuffle_seed)

    def encode_image(self, image: np.ndarray, shuffle_seed: int) -> np.ndarray:
        return self.encode_images(np.asarray(image)[None], shuffle_seed)[0]

    def parameter_count(self) -> int:
        return self.store.n_parameters()

    def clone_architecture(self, seed: int) -> "LinearEncoder":
        return LinearEncoder(
            LinearEncoderSpec(
                patch_size=self.spec.patch_size,
                out_dim=self.spec.out_dim,
                seed=seed,
                channels=self.spec.channels,
                image_size=self.spec.image_size,
            )
        )


def build_linear_encoder(
    patch_size: int, out_dim: int, seed: int, channels: int = 1, image_size=(8, 8)
) -> LinearEncoder:
    return LinearEncoder(
        LinearEncoderSpec(
            patch_size=patch_size,
            out_dim=out_dim,
            seed=seed,
            channels=channels,
            image_size=tuple(image_size),
        )
    )


@dataclass(frozen=True)
class RnnEncoderSpec:
    hidden_dim: int
    embed_dim: int
    vocab_size: int
    seed: int
    embedding_random: bool = True  # False means the table was loaded


class RnnEncoder:
    """tanh recurrence over embedded tokens; the random initial state is
    the private key."""

    kind = "rnn"

    def __init__(self, spec: RnnEncoderSpec, embedding: np.ndarray | None = None):
        self.spec = spec
        st = T.ParamStore(spec.seed)
        h, e = spec.hidden_dim, spec.embed_dim
        if embedding is None:
            st.gaussian("embedding", (spec.vocab_size, e), std=1.0)
        else:
            if embedding.shape != (spec.vocab_size, e):
                raise ValueError("embedding table shape mismatch")
            st.zeros("embedding", (spec.vocab_size, e))
            st["embedding"].data = np.asarray(embedding, dtype=np.float64).copy()
        st.gaussian("w_xh", (e, h), std=e**-0.5)
        st.gaussian("w_hh", (h, h), std=h**-0.5)
        st.zeros("b", (h,))
        st.gaussian("h0", (1, h), std=1.0)
        self.store = st

    def states(self, tokens) -> list[T.Tensor]:
        """Hidden states after each token, as (1, h) graph nodes."""
        tokens = [int(t) for t in tokens]
        if not tokens:
            raise ValueError("cannot encode an empty token sequence")
        if any(t < 0 or t >= self.spec.vocab_size for t in tokens):
            raise ValueError("token id outside the vocabulary")
        st = self.store
        h = st["h0"]
        out = []
        for t in tokens:
            x = T.reshape(
                T.Tensor(st["embedding"].data[t]), (1, self.spec.embed_dim)
            )
            pre = T.add(
                T.add(T.matmul(x, st["w_xh"]), T.matmul(h, st["w_hh"])), st["b"]
            )
            h = T.tanh(pre)
            out.append(h)
        return out

    def encode_text(self, tokens, mode: str = "final_state") -> np.ndarray:
        """Encode a token sequence.

        ``final_state`` returns the last hidden state as one vector (the
        encoded context); ``sequence`` returns one vector per token.
        """
        states = self.states(tokens)
        if mode == "final_state":
            return states[-1].data[0].copy()
        if mode == "sequence":
            return np.concatenate([s.data for s in states], axis=0)
        raise ValueError(f"unknown mode {mode!r}")


def build_rnn_encoder(hidden_dim: int, embedding_source, seed: int) -> RnnEncoder:
    """Build a text encoder.

    ``embedding_source`` is ("random", vocab_size, embed_dim), ("array",
    table), or ("load", path to a raw tensor file).
    """
    kind = embedding_source[0]
    if kind == "random":
        _, vocab, dim = embedding_source
        return RnnEncoder(
            RnnEncoderSpec(hidden_dim=hidden_dim, embed_dim=dim, vocab_size=vocab, seed=seed)
        )
    if kind == "array":
        table = np.asarray(embedding_source[1], dtype=np.float64)
    elif kind == "load":
        table = read_tensor(embedding_source[1])
    else:
        raise ValueError(f"unknown embedding source {kind!r}")
    vocab, dim = table.shape
    spec = RnnEncoderSpec(
        hidden_dim=hidden_dim,
        embed_dim=dim,
        vocab_size=vocab,
        seed=seed,
        embedding_random=False,
    )
    return RnnEncoder(spec, embedding=table)


# ---------------------------------------------------------------------------
# save/load: a directory containing manifest.json plus one raw tensor file
# per parameter.  Private encoders must never land in a published-output
# directory; pipelines keep them under a separate key directory.
# ---------------------------------------------------------------------------

_SPEC_TYPES = {
    "patch": PatchEncoderSpec,
    "linear": LinearEncoderSpec,
    "rnn": RnnEncoderSpec,
}


def save_encoder(encoder, dirpath, adversarial: bool = False) -> None:
    path = Path(dirpath)
    path.mkdir(parents=True, exist_ok=True)
    spec = asdict(encoder.spec)
    manifest = {
        "format": 1,
        "kind": encoder.kind,
        "spec": spec,
        "adversarial": bool(adversarial),
        "params": encoder.store.names(),
        "seed_record": encoder.store.seed_record(),
    }
    with open(path / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for name, arr in encoder.store.state_arrays().items():
        write_tensor(path / (name.replace("/", "__") + ".ptnsr"), arr)


def load_encoder(dirpath):
    path = Path(dirpath)
    with open(path / "manifest.json", encoding="utf-8") as fh:
        manifest = json.load(fh)
    kind = manifest["kind"]
    spec_cls = _SPEC_TYPES[kind]
    raw_spec = dict(manifest["spec"])
    if "image_size" in raw_spec:
        raw_spec["image_size"] = tuple(raw_spec["image_size"])
    spec = spec_cls(**raw_spec)
    if kind == "patch":
        enc = PatchEncoder(spec)
    elif kind == "linear":
        enc = LinearEncoder(spec)
    else:
        enc = RnnEncoder(spec)
    state = {
        name: read_tensor(path / (name.replace("/", "__") + ".ptnsr"))
        for name in manifest["params"]
    }
    enc.store.load_state(state)
    return enc
