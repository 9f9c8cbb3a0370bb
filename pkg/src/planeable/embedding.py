"""
The per-scene embedding field: a small periodic MLP mapping world points to
embeddings, trained online with a pairwise push/pull loss on same-image pixel
pairs. Forward and backward passes and the Adam optimizer are written on numpy.
"""

from __future__ import annotations

from collections import deque
from collections.abc import Sequence
from dataclasses import dataclass
from logging import getLogger
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .config import DistillConfig
from .errors import ArchiveFormatError
from .geometry import normals_from_depth
from .mesh import TriMesh
from .tsdf import Keyframe

logger = getLogger(__name__)

CHECKPOINT_MAGIC = b"PMLP"
CHECKPOINT_VERSION = 1
_ADAM_EPS = 1e-8
_FORWARD_CHUNK = 65_536


@dataclass
class _Cache:
    inputs: NDArray[np.float64]
    pre: list[NDArray[np.float64]]
    post: list[NDArray[np.float64]]


class SceneEmbeddingMlp:
    """
    A periodic MLP `f(p)` from 3D world points to plane embeddings.

    Inputs are mapped to [-1, 1]^3 using fixed scene bounds, then pass through a
    sine encoding layer `sin(omega0 * (W x + b))`, `hidden_layers` sine layers
    `sin(W h + b)` and a linear head. All weights live in one flat parameter
    vector; the per-layer matrices are views into it.

    Attributes:
        cfg: Architecture and optimizer settings.
        lower: Lower corner of the normalization box.
        upper: Upper corner of the normalization box.
        params: Flat parameter vector.
    """

    def __init__(
        self,
        cfg: DistillConfig | None = None,
        bounds: tuple[ArrayLike, ArrayLike] = ((-1.0, -1.0, -1.0), (1.0, 1.0, 1.0)),
        rng_seed: int | Sequence[int] = 0,
    ):
        self.cfg = cfg or DistillConfig()
        self.lower = np.asarray(bounds[0], dtype=np.float64).reshape(3)
        self.upper = np.asarray(bounds[1], dtype=np.float64).reshape(3)
        if np.any(self.upper <= self.lower):
            raise ValueError(f"Invalid normalization bounds: {self.lower} .. {self.upper}")

        widths = [
            3,
            self.cfg.encoding_features,
            *([self.cfg.hidden_width] * self.cfg.hidden_layers),
            self.cfg.embedding_dim,
        ]
        self.shapes: list[tuple[int, int]] = list(zip(widths[:-1], widths[1:]))
        self.params = np.zeros(sum(i * o + o for i, o in self.shapes))
        self.layers = self._views(self.params)

        self._m = np.zeros_like(self.params)
        self._v = np.zeros_like(self.params)
        self.step_count = 0
        self._initialize(np.random.default_rng(rng_seed))

    @property
    def n_params(self) -> int:
        return len(self.params)

    def _views(self, flat: NDArray[np.float64]) -> list[tuple[NDArray, NDArray]]:
        views = []
        offset = 0
        for fan_in, fan_out in self.shapes:
            w = flat[offset : offset + fan_in * fan_out].reshape(fan_in, fan_out)
            offset += fan_in * fan_out
            b = flat[offset : offset + fan_out]
            offset += fan_out
            views.append((w, b))
        return views

    def _initialize(self, rng: np.random.Generator) -> None:
        omega0 = self.cfg.omega0
        for k, ((fan_in, _), (w, b)) in enumerate(zip(self.shapes, self.layers)):
            bound = np.sqrt(6.0 / fan_in)
            if k == 0:
                bound /= omega0
                w[...] = rng.uniform(-bound, bound, w.shape)
                b[...] = rng.uniform(-bound, bound, b.shape)
            else:
                w[...] = rng.uniform(-bound, bound, w.shape)
                b[...] = rng.uniform(-1 / np.sqrt(fan_in), 1 / np.sqrt(fan_in), b.shape)

    def normalize(self, points: ArrayLike) -> NDArray[np.float64]:
        """Map world points into the [-1, 1] box used by the network."""
        p = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        return 2.0 * (p - self.lower) / (self.upper - self.lower) - 1.0

    def _forward(self, points: ArrayLike) -> tuple[NDArray[np.float64], _Cache]:
        x = self.normalize(points)
        pre: list[NDArray] = []
        post: list[NDArray] = []
        h = x
        last = len(self.layers) - 1
        for k, (w, b) in enumerate(self.layers):
            z = h @ w + b
            if k == 0:
                h = np.sin(self.cfg.omega0 * z)
            elif k < last:
                h = np.sin(z)
            else:
                h = z
            pre.append(z)
            post.append(h)
        return h, _Cache(x, pre, post)

    def forward(self, points: ArrayLike) -> NDArray[np.float64]:
        """
        Evaluate the embedding of each point.

        Args:
            points: A 3-vector or an (N, 3) array of world points.

        Returns:
            NDArray: (N, D) embeddings, or (D,) for a single point.
        """
        p = np.asarray(points, dtype=np.float64)
        single = p.ndim == 1
        p = p.reshape(-1, 3)
        chunks = [
            self._forward(p[start : start + _FORWARD_CHUNK])[0]
            for start in range(0, max(len(p), 1), _FORWARD_CHUNK)
        ]
        out = np.concatenate(chunks) if chunks else np.zeros((0, self.cfg.embedding_dim))
        return out[0] if single else out

    __call__ = forward

    def backward(self, cache: _Cache, grad_out: NDArray[np.float64]) -> NDArray[np.float64]:
        """
        Back-propagate an output gradient through the network.

        Args:
            cache: Intermediate values of the matching forward pass.
            grad_out: (N, D) gradient of the loss with respect to the outputs.

        Returns:
            NDArray: Gradient with respect to the flat parameter vector.
        """
        grad = np.zeros_like(self.params)
        grad_layers = self._views(grad)
        g = grad_out
        for k in range(len(self.layers) - 1, -1, -1):
            w, _ = self.layers[k]
            gw, gb = grad_layers[k]
            if k == 0:
                g = g * self.cfg.omega0 * np.cos(self.cfg.omega0 * cache.pre[0])
            elif k < len(self.layers) - 1:
                g = g * np.cos(cache.pre[k])
            below = cache.inputs if k == 0 else cache.post[k - 1]
            gw[...] = below.T @ g
            gb[...] = g.sum(axis=0)
            g = g @ w.T
        return grad

    def adam_step(self, grad: NDArray[np.float64]) -> None:
        """
        Apply one Adam update in place.

        Raises:
            FloatingPointError: If the update produces non-finite weights.
        """
        cfg = self.cfg
        self.step_count += 1
        self._m = cfg.beta1 * self._m + (1 - cfg.beta1) * grad
        self._v = cfg.beta2 * self._v + (1 - cfg.beta2) * grad**2
        m_hat = self._m / (1 - cfg.beta1**self.step_count)
        v_hat = self._v / (1 - cfg.beta2**self.step_count)
        self.params -= cfg.lr * m_hat / (np.sqrt(v_hat) + _ADAM_EPS)
        if not np.all(np.isfinite(self.params)):
            raise FloatingPointError(f"Non-finite weights after step {self.step_count}")

    def set_params(self, flat: ArrayLike) -> None:
        """Overwrite the weights, keeping the layer views valid."""
        values = np.asarray(flat, dtype=np.float64).reshape(-1)
        if len(values) != self.n_params:
            raise ValueError(f"Expected {self.n_params} parameters, got {len(values)}")
        self.params[...] = values

    def copy(self) -> SceneEmbeddingMlp:
        """An independent snapshot of the weights and optimizer state."""
        clone = SceneEmbeddingMlp(self.cfg, (self.lower, self.upper))
        clone.set_params(self.params)
        clone._m = self._m.copy()
        clone._v = self._v.copy()
        clone.step_count = self.step_count
        return clone


@dataclass
class TrainingPair:
    """Two pixels of the same keyframe lifted to world points."""

    p_i: NDArray[np.float64]
    p_j: NDArray[np.float64]
    x_i: NDArray[np.float64]
    x_j: NDArray[np.float64]
    n_i: NDArray[np.float64]
    n_j: NDArray[np.float64]


@dataclass
class PairBatch:
    """
    A batch of training pairs stored as stacked arrays.

    Attributes:
        p_i, p_j: (M, 3) world points.
        x_i, x_j: (M, D) pixel embeddings.
        n_i, n_j: (M, 3) unit normals.
    """

    p_i: NDArray[np.float64]
    p_j: NDArray[np.float64]
    x_i: NDArray[np.float64]
    x_j: NDArray[np.float64]
    n_i: NDArray[np.float64]
    n_j: NDArray[np.float64]

    def __len__(self) -> int:
        return len(self.p_i)

    @classmethod
    def from_pairs(cls, pairs: Sequence[TrainingPair]) -> PairBatch:
        return cls(
            *(
                np.stack([np.asarray(getattr(p, name), dtype=np.float64) for p in pairs])
                for name in ("p_i", "p_j", "x_i", "x_j", "n_i", "n_j")
            )
        )

    @classmethod
    def concatenate(cls, batches: Sequence[PairBatch]) -> PairBatch:
        return cls(
            *(
                np.concatenate([getattr(b, name) for b in batches])
                for name in ("p_i", "p_j", "x_i", "x_j", "n_i", "n_j")
            )
        )


def _as_batch(pairs: TrainingPair | PairBatch | Sequence[TrainingPair]) -> PairBatch:
    if isinstance(pairs, PairBatch):
        return pairs
    if isinstance(pairs, TrainingPair):
        return PairBatch.from_pairs([pairs])
    return PairBatch.from_pairs(pairs)


def pair_branches(
    pairs: TrainingPair | PairBatch | Sequence[TrainingPair], cfg: DistillConfig
) -> NDArray[np.bool_]:
    """
    Decide per pair whether the loss pulls (True) or pushes (False).

    A pair is pulled when its pixel embeddings are closer than `t_e` and its
    normals agree above `t_n`.
    """
    b = _as_batch(pairs)
    close = np.linalg.norm(b.x_i - b.x_j, axis=1) < cfg.t_e
    aligned = np.einsum("ij,ij->i", b.n_i, b.n_j) > cfg.t_n
    return close & aligned


def _loss_and_grad_out(
    f_i: NDArray, f_j: NDArray, pull: NDArray[np.bool_], t_p: float
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    diff = f_i - f_j
    dist = np.linalg.norm(diff, axis=1)
    loss = np.where(pull, dist, np.maximum(0.0, t_p - dist))

    # d dist / d f_i, zero where the distance vanishes
    unit = np.zeros_like(diff)
    nz = dist > 0
    unit[nz] = diff[nz] / dist[nz, None]
    active_push = ~pull & (dist < t_p)
    sign = np.where(pull, 1.0, np.where(active_push, -1.0, 0.0))
    return loss, sign[:, None] * unit


def pair_loss(
    pair: TrainingPair, mlp: SceneEmbeddingMlp, cfg: DistillConfig
) -> float:
    """
    The push/pull loss of one pair.

    Pulled pairs cost the distance between their 3D embeddings; pushed pairs cost
    the amount by which that distance falls short of the margin `t_p`.
    """
    return batch_loss(pair, mlp, cfg)


def batch_loss(
    pairs: TrainingPair | PairBatch | Sequence[TrainingPair],
    mlp: SceneEmbeddingMlp,
    cfg: DistillConfig,
) -> float:
    """Sum of the pair losses of a batch."""
    b = _as_batch(pairs)
    f_i = mlp.forward(b.p_i)
    f_j = mlp.forward(b.p_j)
    loss, _ = _loss_and_grad_out(f_i, f_j, pair_branches(b, cfg), cfg.t_p)
    return float(loss.sum())


def _loss_and_gradient(
    b: PairBatch, mlp: SceneEmbeddingMlp, cfg: DistillConfig, pull: NDArray[np.bool_]
) -> tuple[float, NDArray[np.float64]]:
    m = len(b)
    out, cache = mlp._forward(np.concatenate([b.p_i, b.p_j]))
    loss, g_i = _loss_and_grad_out(out[:m], out[m:], pull, cfg.t_p)
    grad = mlp.backward(cache, np.concatenate([g_i, -g_i]))
    return float(loss.sum()), grad


def loss_gradient(
    pairs: TrainingPair | PairBatch | Sequence[TrainingPair],
    mlp: SceneEmbeddingMlp,
    cfg: DistillConfig,
) -> NDArray[np.float64]:
    """
    Gradient of the summed batch loss with respect to all network weights.

    Subgradients at the hinge and at zero embedding distance are taken as 0.

    Args:
        pairs: A non-empty batch.
        mlp: The network.
        cfg: Loss thresholds.

    Returns:
        NDArray: Gradient vector of length `mlp.n_params`.
    """
    b = _as_batch(pairs)
    if not len(b):
        raise ValueError("loss_gradient needs at least one pair")
    return _loss_and_gradient(b, mlp, cfg, pair_branches(b, cfg))[1]


@dataclass
class _FrameSamples:
    points: NDArray[np.float64]
    embeddings: NDArray[np.float64]
    normals: NDArray[np.float64]


def _sample_frame(
    frame: Keyframe, n_pixels: int, rng: np.random.Generator
) -> _FrameSamples | None:
    normals, valid = normals_from_depth(frame.depth, frame.pose.intrinsics)
    valid &= frame.depth > 0
    flat = np.flatnonzero(valid)
    if len(flat) < 2:
        return None
    chosen = rng.choice(flat, size=min(n_pixels, len(flat)), replace=False)
    vi, ui = np.unravel_index(chosen, frame.shape)

    k = frame.pose.intrinsics
    d = frame.depth[vi, ui]
    cam = np.stack([(ui - k[0, 2]) / k[0, 0] * d, (vi - k[1, 2]) / k[1, 1] * d, d], axis=-1)
    world = cam @ frame.pose.rotation.T + frame.pose.translation
    return _FrameSamples(world, frame.pixel_embedding[vi, ui], normals[vi, ui])


def _draw_pairs(samples: _FrameSamples, n_pairs: int, rng: np.random.Generator) -> PairBatch:
    n = len(samples.points)
    i = rng.integers(0, n, size=n_pairs)
    j = rng.integers(0, n - 1, size=n_pairs)
    j += j >= i
    return PairBatch(
        samples.points[i],
        samples.points[j],
        samples.embeddings[i],
        samples.embeddings[j],
        samples.normals[i],
        samples.normals[j],
    )


def online_update(
    mlp: SceneEmbeddingMlp,
    new_keyframe: Keyframe,
    replay: Sequence[Keyframe] = (),
    rng_seed: int | Sequence[int] = 0,
    cfg: DistillConfig | None = None,
    branch_log: list[NDArray[np.bool_]] | None = None,
) -> SceneEmbeddingMlp:
    """
    Train the network on a new keyframe together with recent ones.

    Samples `pixels_per_keyframe` valid pixels from the new keyframe and each of
    the last `replay_window` replayed keyframes. Every optimizer step draws
    `pixels_per_keyframe` random same-image pairs per keyframe from those samples
    and takes one Adam step on the mean pair loss.

    Args:
        mlp: The network, updated in place.
        new_keyframe: The keyframe just added.
        replay: Earlier keyframes, most recent last.
        rng_seed: Seed for pixel and pair sampling.
        cfg: Loss and sampling settings; defaults to the network's.
        branch_log: If given, the pull/push decisions of every step are appended.

    Returns:
        SceneEmbeddingMlp: The same network.
    """
    cfg = cfg or mlp.cfg
    rng = np.random.default_rng(rng_seed)

    new_samples = _sample_frame(new_keyframe, cfg.pixels_per_keyframe, rng)
    if new_samples is None:
        logger.warning(
            f"Keyframe {new_keyframe.frame_id} has fewer than 2 valid pixels; skipping update."
        )
        return mlp

    samples = [new_samples]
    recent = list(replay)[-cfg.replay_window :] if cfg.replay_window > 0 else []
    for frame in reversed(recent):
        s = _sample_frame(frame, cfg.pixels_per_keyframe, rng)
        if s is not None:
            samples.append(s)

    for step in range(cfg.steps_per_keyframe):
        batch = PairBatch.concatenate(
            [_draw_pairs(s, cfg.pixels_per_keyframe, rng) for s in samples]
        )
        pull = pair_branches(batch, cfg)
        if branch_log is not None:
            branch_log.append(pull)
        loss, grad = _loss_and_gradient(batch, mlp, cfg, pull)
        mlp.adam_step(grad / len(batch))
        logger.debug(
            f"Keyframe {new_keyframe.frame_id} step {step}: mean loss {loss / len(batch):.4f}, "
            f"{int(pull.sum())}/{len(batch)} pulled."
        )
    return mlp


def embed_mesh(mlp: SceneEmbeddingMlp, mesh: TriMesh) -> TriMesh:
    """Return a copy of the mesh with every vertex embedded by the network."""
    embeddings = mlp.forward(mesh.vertices).reshape(len(mesh.vertices), mlp.cfg.embedding_dim)
    return mesh.with_embeddings(embeddings)


class EmbeddingTrainer:
    """
    Online trainer holding the network and its keyframe replay window.

    Each keyframe is trained with the seed `(seed, keyframe index)`, so batch and
    incremental runs over the same frames produce the same weights.
    """

    def __init__(self, mlp: SceneEmbeddingMlp, cfg: DistillConfig | None = None, seed: int = 0):
        self.mlp = mlp
        self.cfg = cfg or mlp.cfg
        self.seed = seed
        self.replay: deque[Keyframe] = deque(maxlen=max(self.cfg.replay_window, 1))
        self.branch_log: list[NDArray[np.bool_]] = []
        self.n_updates = 0

    def update(self, keyframe: Keyframe) -> SceneEmbeddingMlp:
        """Train on one new keyframe and add it to the replay window."""
        replay = list(self.replay) if self.cfg.replay_window > 0 else []
        online_update(
            self.mlp,
            keyframe,
            replay,
            rng_seed=(self.seed, self.n_updates),
            cfg=self.cfg,
            branch_log=self.branch_log,
        )
        self.replay.append(keyframe)
        self.n_updates += 1
        return self.mlp


def save_checkpoint(mlp: SceneEmbeddingMlp, path: Path | str) -> None:
    """
    Write the weights as `PMLP`, u32 version, u32 count, f32 weights, f32 bounds.
    """
    p = Path(path)
    with open(p, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(np.array([CHECKPOINT_VERSION, mlp.n_params], dtype="<u4").tobytes())
        f.write(mlp.params.astype("<f4").tobytes())
        f.write(np.concatenate([mlp.lower, mlp.upper]).astype("<f4").tobytes())
    logger.info(f"Wrote {mlp.n_params} weights to: {p}")


def load_checkpoint(path: Path | str, cfg: DistillConfig | None = None) -> SceneEmbeddingMlp:
    """
    Read a checkpoint written by `save_checkpoint`.

    Args:
        path: Checkpoint file.
        cfg: Architecture matching the stored weights.

    Returns:
        SceneEmbeddingMlp: The restored network with a fresh optimizer state.

    Raises:
        ArchiveFormatError: If the file is malformed or does not match `cfg`.
    """
    p = Path(path)
    data = p.read_bytes()
    if len(data) < 12 or data[:4] != CHECKPOINT_MAGIC:
        raise ArchiveFormatError(p, "not a PMLP checkpoint")
    version, count = np.frombuffer(data[4:12], dtype="<u4")
    if version != CHECKPOINT_VERSION:
        raise ArchiveFormatError(p, f"unsupported checkpoint version {version}")
    if len(data) != 12 + 4 * (int(count) + 6):
        raise ArchiveFormatError(p, "truncated checkpoint")
    values = np.frombuffer(data[12:], dtype="<f4").astype(np.float64)
    bounds = values[count:]
    mlp = SceneEmbeddingMlp(cfg, (bounds[:3], bounds[3:]))
    if mlp.n_params != count:
        raise ArchiveFormatError(
            p, f"checkpoint holds {count} weights, the configured network has {mlp.n_params}"
        )
    mlp.set_params(values[:count])
    return mlp
