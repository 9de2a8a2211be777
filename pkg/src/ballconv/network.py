"""Single-convolution-layer descriptor pipeline with adaptive weighted
frequency pooling, trained by hand-rolled reverse-mode gradients.

Per kernel ``j`` and radial shell ``k`` the layer forms the dense frequency
map ``F = c_k g_j^T`` (outer product of the shell's real moment vector and
the kernel's base coefficients) and pools it in two orthogonal directions:

    v1 = rowsum(F o W1) = c_k * (W1 g_j)
    v2 = colsum(F o W2) = g_j * (W2^T c_k)

(the rank-1 structure collapses the Hadamard-then-sum to elementwise
products, which is how both the forward pass and the gradients are
evaluated).  The concatenated ``(v1, v2)`` slots feed one fully connected
layer; there is no nonlinearity anywhere, so the logits are exactly linear
in the input values when the bias is zero.  The retrieval descriptor is
the mean of the slots.
"""

from __future__ import annotations

import json
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import symmetry
from .basis import sph_harmonic
from .layout import LAYOUT_VERSION, get_layout
from .moments import (
    NETWORK_PINV_ITERS,
    SampleSet,
    estimate_spectral_radius,
    fit_moments,
    pinv_newton_schulz,
    quadrature_moments,
)
from .convolve import ShellDecomposition
from .shapes import LabeledShape

MAGIC_CHECKPOINT = b"ZCK1"


@dataclass
class PipelineConfig:
    N: int = 6
    n_kernels: int = 16
    n_shells: int = 10
    n_classes: int = 3
    conv: str = "volumetric"          # or "spherical" (ablation baseline)
    features: str = "conv"            # or "axial-symmetry"
    batch_size: int = 2
    lr_base: float = 0.1
    lr_decay: float = 0.9
    lr_decay_steps: float = 3000.0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    init_std: float = 0.5
    pinv_iters: int = NETWORK_PINV_ITERS

    def __post_init__(self) -> None:
        if min(self.n_kernels, self.n_shells, self.n_classes, self.batch_size) < 1:
            raise ValueError("counts must be positive")
        if self.lr_base <= 0:
            raise ValueError("learning rate must be positive")
        if self.conv not in ("volumetric", "spherical"):
            raise ValueError(f"unknown conv mode {self.conv!r}")
        if self.features not in ("conv", "axial-symmetry"):
            raise ValueError(f"unknown feature mode {self.features!r}")

    def learning_rate(self, step: int) -> float:
        return self.lr_base * self.lr_decay ** (step / self.lr_decay_steps)


@dataclass
class PoolWeights:
    W1: np.ndarray
    W2: np.ndarray

    def __post_init__(self) -> None:
        self.W1 = np.asarray(self.W1, dtype=float)
        self.W2 = np.asarray(self.W2, dtype=float)
        if self.W1.shape != self.W2.shape:
            raise ValueError("pooling weight shapes must match")


def pool(freq_map: np.ndarray, w: PoolWeights) -> tuple[np.ndarray, np.ndarray]:
    """Row sums of ``freq_map o W1`` and column sums of ``freq_map o W2``."""
    freq_map = np.asarray(freq_map, dtype=float)
    if freq_map.shape != w.W1.shape:
        raise ValueError(f"frequency map shape {freq_map.shape} does not match weights {w.W1.shape}")
    v1 = (freq_map * w.W1).sum(axis=1)
    v2 = (freq_map * w.W2).sum(axis=0)
    return v1, v2


@dataclass
class Params:
    """Trainable tensors; masks are re-applied after every update."""

    tensors: dict[str, np.ndarray]
    masks: dict[str, np.ndarray] = field(default_factory=dict)

    def apply_masks(self) -> None:
        for name, mask in self.masks.items():
            self.tensors[name] *= mask

    def copy(self) -> "Params":
        return Params({k: v.copy() for k, v in self.tensors.items()},
                      {k: v.copy() for k, v in self.masks.items()})


# ---------------------------------------------------------------------------
# feature extraction (inputs are constants; gradients never flow here)
# ---------------------------------------------------------------------------

SPHERICAL_LMAX = 6


def _surface_entries(lmax: int = SPHERICAL_LMAX):
    return [(l, m) for l in range(lmax + 1) for m in range(0, l + 1)]


def shell_moments(samples: SampleSet, cfg: PipelineConfig) -> np.ndarray:
    """Per-shell moment matrix ``C`` of shape ``(n_shells, layout.dim)``.

    Shell contents are shifted down into the kernel frame before fitting,
    which is what makes the shell index behave like a translation-
    equivariant feature-map coordinate.
    """
    layout = get_layout(cfg.N)
    shells = ShellDecomposition(cfg.n_shells)
    assign = shells.assign(samples.r)
    C = np.zeros((cfg.n_shells, layout.dim))
    for k, qk in enumerate(shells.boundaries):
        idx = np.nonzero(assign == k)[0]
        if idx.size == 0:
            continue
        sub = samples.subset(idx)
        shifted = SampleSet(sub.theta, sub.phi, sub.r - qk, sub.values)
        C[k] = fit_moments(shifted, cfg.N, pinv_iters=cfg.pinv_iters,
                           warn_underdetermined=False).c
    return C


def surface_coefficients(samples: SampleSet, cfg: PipelineConfig) -> np.ndarray:
    """Real harmonic coefficient vector of the surface-projected function.

    Radius is collapsed: values are fitted against directions only, so any
    multi-valued radial structure along a direction is averaged away.  This
    is the representation consumed by the spherical-convolution baseline.
    """
    entries = _surface_entries()
    cols = [sph_harmonic(l, m, samples.theta, samples.phi) for l, m in entries]
    B = np.stack(cols, axis=1)
    X = np.hstack([B.real, B.imag])
    P = pinv_newton_schulz(X, alpha=_safe_alpha(X), iters=cfg.pinv_iters)
    return P @ samples.values


def _safe_alpha(X: np.ndarray) -> float:
    rho = estimate_spectral_radius(X)
    return 1.0 / rho if rho > 0 else 1.0


def axial_symmetry_features(samples: SampleSet, cfg: PipelineConfig) -> np.ndarray:
    """Normalized symmetry about the four equi-angular axes.

    Built on surface-measure (projection) moments rather than the value
    fit: with the value transform v = r the fitted function depends on
    position only through the radius, so it is symmetric about every axis
    and carries no shape signal.  The projection route weights by where
    the samples sit, which is exactly what an axial-symmetry feature must
    measure.
    """
    om = quadrature_moments(samples.with_mc_weights(), cfg.N)
    return symmetry.symmetry_descriptor(om)


def extract_features(shapes: list[LabeledShape], cfg: PipelineConfig,
                     threads: int = 1) -> list[np.ndarray]:
    """Constant per-shape network inputs (parallel over shapes)."""
    if cfg.features == "axial-symmetry":
        fn = axial_symmetry_features
    elif cfg.conv == "spherical":
        fn = surface_coefficients
    else:
        fn = shell_moments
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool_:
            return list(pool_.map(lambda s: fn(s.samples, cfg), shapes))
    return [fn(s.samples, cfg) for s in shapes]


# ---------------------------------------------------------------------------
# forward / backward
# ---------------------------------------------------------------------------

def feature_dims(cfg: PipelineConfig) -> tuple[int, int, int]:
    """(n_slots, slot_dim, fc_input_dim) for the configured head."""
    if cfg.features == "axial-symmetry":
        return 1, 4, 4
    if cfg.conv == "spherical":
        n_f = 2 * len(_surface_entries())
        n_g = SPHERICAL_LMAX + 1
        return cfg.n_kernels, n_f + n_g, cfg.n_kernels * (n_f + n_g)
    dim = get_layout(cfg.N).dim
    n_slots = cfg.n_kernels * cfg.n_shells
    return n_slots, 2 * dim, n_slots * 2 * dim


def init_params(cfg: PipelineConfig, rng: np.random.Generator) -> Params:
    """Weights from N(0, init_std); biases zero; kernel masks applied."""
    n_slots, slot_dim, fc_in = feature_dims(cfg)
    t: dict[str, np.ndarray] = {}
    masks: dict[str, np.ndarray] = {}
    if cfg.features == "conv":
        if cfg.conv == "volumetric":
            layout = get_layout(cfg.N)
            t["kernels"] = rng.normal(0.0, cfg.init_std, (cfg.n_kernels, layout.dim))
            masks["kernels"] = np.broadcast_to(layout.kernel_mask, t["kernels"].shape).astype(float).copy()
            t["W1"] = rng.normal(0.0, cfg.init_std, (layout.dim, layout.dim))
            t["W2"] = rng.normal(0.0, cfg.init_std, (layout.dim, layout.dim))
        else:
            n_f = 2 * len(_surface_entries())
            n_g = SPHERICAL_LMAX + 1
            t["kernels"] = rng.normal(0.0, cfg.init_std, (cfg.n_kernels, n_g))
            t["W1"] = rng.normal(0.0, cfg.init_std, (n_f, n_g))
            t["W2"] = rng.normal(0.0, cfg.init_std, (n_f, n_g))
    t["fc_w"] = rng.normal(0.0, cfg.init_std, (cfg.n_classes, fc_in))
    t["fc_b"] = np.zeros(cfg.n_classes)
    p = Params(t, masks)
    p.apply_masks()
    return p


def _slots_volumetric(C: np.ndarray, params: Params):
    G, W1, W2 = params.tensors["kernels"], params.tensors["W1"], params.tensors["W2"]
    A1 = G @ W1.T                      # (J, dim): row j = W1 @ g_j
    B2 = C @ W2                        # (K, dim): row k = W2^T @ c_k
    V1 = C[None, :, :] * A1[:, None, :]    # (J, K, dim)
    V2 = G[:, None, :] * B2[None, :, :]
    slots = np.concatenate([V1, V2], axis=2)   # (J, K, 2*dim)
    return slots, (A1, B2, V1, V2)


def _slots_spherical(fvec: np.ndarray, params: Params):
    G, W1, W2 = params.tensors["kernels"], params.tensors["W1"], params.tensors["W2"]
    A1 = G @ W1.T                      # (J, n_f)
    b2 = W2.T @ fvec                   # (n_g,)
    V1 = fvec[None, :] * A1            # (J, n_f)
    V2 = G * b2[None, :]               # (J, n_g)
    slots = np.concatenate([V1, V2], axis=1)
    return slots, (A1, b2, V1, V2)


def forward(features: np.ndarray, params: Params, cfg: PipelineConfig):
    """Logits and the retrieval descriptor (slot mean) for one shape."""
    if cfg.features == "axial-symmetry":
        z = np.asarray(features, dtype=float).ravel()
        slots = z[None, :]
    elif cfg.conv == "spherical":
        slots, _ = _slots_spherical(features, params)
        z = slots.ravel()
    else:
        slots, _ = _slots_volumetric(features, params)
        z = slots.reshape(-1)
    logits = params.tensors["fc_w"] @ z + params.tensors["fc_b"]
    descriptor = slots.reshape(-1, slots.shape[-1]).mean(axis=0)
    return logits, descriptor


def forward_samples(samples: SampleSet, params: Params, cfg: PipelineConfig):
    if cfg.features == "axial-symmetry":
        feat = axial_symmetry_features(samples, cfg)
    elif cfg.conv == "spherical":
        feat = surface_coefficients(samples, cfg)
    else:
        feat = shell_moments(samples, cfg)
    return forward(feat, params, cfg)


def softmax(logits: np.ndarray) -> np.ndarray:
    e = np.exp(logits - logits.max())
    return e / e.sum()


def loss_and_grads(features: list[np.ndarray], labels: np.ndarray, params: Params,
                   cfg: PipelineConfig):
    """Mean softmax cross-entropy over the batch and gradients for every tensor."""
    grads = {k: np.zeros_like(v) for k, v in params.tensors.items()}
    n = len(features)
    labels = np.asarray(labels, dtype=int)
    if np.any(labels < 0) or np.any(labels >= cfg.n_classes):
        raise ValueError("label out of range")
    total = 0.0
    fc_w = params.tensors["fc_w"]
    for feat, y in zip(features, labels):
        if cfg.features == "axial-symmetry":
            z = np.asarray(feat, dtype=float).ravel()
            cache = None
        elif cfg.conv == "spherical":
            slots, cache = _slots_spherical(feat, params)
            z = slots.ravel()
        else:
            slots, cache = _slots_volumetric(feat, params)
            z = slots.reshape(-1)
        logits = fc_w @ z + params.tensors["fc_b"]
        p = softmax(logits)
        total += -np.log(max(p[y], 1e-300))
        dlogits = p.copy()
        dlogits[y] -= 1.0
        dlogits /= n
        grads["fc_w"] += np.outer(dlogits, z)
        grads["fc_b"] += dlogits
        dz = fc_w.T @ dlogits
        if cfg.features == "axial-symmetry":
            continue
        if cfg.conv == "spherical":
            A1, b2, _, _ = cache
            G = params.tensors["kernels"]
            n_f = A1.shape[1]
            dslots = dz.reshape(cfg.n_kernels, -1)
            dV1, dV2 = dslots[:, :n_f], dslots[:, n_f:]
            dA1 = dV1 * feat[None, :]
            grads["W1"] += dA1.T @ G
            grads["kernels"] += dA1 @ params.tensors["W1"]
            db2 = (dV2 * G).sum(axis=0)
            grads["W2"] += np.outer(feat, db2)
            grads["kernels"] += dV2 * b2[None, :]
        else:
            A1, B2, _, _ = cache
            G = params.tensors["kernels"]
            C = feat
            dim = C.shape[1]
            dslots = dz.reshape(cfg.n_kernels, cfg.n_shells, 2 * dim)
            dV1, dV2 = dslots[..., :dim], dslots[..., dim:]
            dA1 = np.einsum("jkd,kd->jd", dV1, C)
            grads["W1"] += dA1.T @ G
            grads["kernels"] += dA1 @ params.tensors["W1"]
            dB2 = np.einsum("jkd,jd->kd", dV2, G)
            grads["W2"] += C.T @ dB2
            grads["kernels"] += np.einsum("jkd,kd->jd", dV2, B2)
    for name, mask in params.masks.items():
        grads[name] *= mask
    return total / n, grads


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------

@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def like(cls, params: Params) -> "AdamState":
        return cls({k: np.zeros_like(t) for k, t in params.tensors.items()},
                   {k: np.zeros_like(t) for k, t in params.tensors.items()})


def adam_step(params: Params, grads: dict, state: AdamState, cfg: PipelineConfig) -> None:
    state.step += 1
    lr = cfg.learning_rate(state.step)
    b1, b2, eps = cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps
    corr1 = 1.0 - b1 ** state.step
    corr2 = 1.0 - b2 ** state.step
    for name, g in grads.items():
        state.m[name] = b1 * state.m[name] + (1.0 - b1) * g
        state.v[name] = b2 * state.v[name] + (1.0 - b2) * g * g
        mhat = state.m[name] / corr1
        vhat = state.v[name] / corr2
        params.tensors[name] -= lr * mhat / (np.sqrt(vhat) + eps)
    params.apply_masks()


@dataclass
class TrainHistory:
    loss: list[float] = field(default_factory=list)
    train_accuracy: list[float] = field(default_factory=list)
    test_accuracy: list[float] = field(default_factory=list)


def evaluate(features: list[np.ndarray], labels: np.ndarray, params: Params,
             cfg: PipelineConfig) -> float:
    correct = 0
    for feat, y in zip(features, labels):
        logits, _ = forward(feat, params, cfg)
        correct += int(np.argmax(logits) == y)
    return correct / max(len(features), 1)


def train(train_features: list[np.ndarray], train_labels: np.ndarray,
          cfg: PipelineConfig, seed: int, epochs: int = 15,
          test_features: list[np.ndarray] | None = None,
          test_labels: np.ndarray | None = None,
          params: Params | None = None):
    """Adam loop with the decaying schedule; deterministic given the seed."""
    if len(train_features) == 0:
        raise ValueError("empty dataset")
    rng = np.random.default_rng(seed)
    if params is None:
        params = init_params(cfg, rng)
    state = AdamState.like(params)
    history = TrainHistory()
    labels = np.asarray(train_labels, dtype=int)
    n = len(train_features)
    for _ in range(epochs):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            batch = [train_features[i] for i in idx]
            loss, grads = loss_and_grads(batch, labels[idx], params, cfg)
            adam_step(params, grads, state, cfg)
            losses.append(loss)
        history.loss.append(float(np.mean(losses)))
        history.train_accuracy.append(evaluate(train_features, labels, params, cfg))
        if test_features is not None:
            history.test_accuracy.append(
                evaluate(test_features, np.asarray(test_labels, dtype=int), params, cfg))
    return params, history


# ---------------------------------------------------------------------------
# retrieval
# ---------------------------------------------------------------------------

def cosine_rank(query: np.ndarray, vectors: np.ndarray):
    """Indices by descending cosine similarity; ties keep insertion order."""
    query = np.asarray(query, dtype=float)
    qn = np.linalg.norm(query)
    if qn == 0.0:
        raise ValueError("zero-norm query")
    vn = np.linalg.norm(vectors, axis=1)
    sims = (vectors @ query) / (np.where(vn > 0, vn, 1.0) * qn)
    order = np.argsort(-sims, kind="stable")
    return order, sims


def nn_accuracy(vectors: np.ndarray, labels: np.ndarray) -> float:
    """Leave-one-out nearest-neighbour label agreement."""
    labels = np.asarray(labels)
    hits = 0
    for i in range(len(vectors)):
        order, _ = cosine_rank(vectors[i], vectors)
        best = order[order != i][0]
        hits += int(labels[best] == labels[i])
    return hits / max(len(vectors), 1)


def average_precision(ranked_labels: np.ndarray, positive) -> float:
    rel = (np.asarray(ranked_labels) == positive).astype(float)
    if rel.sum() == 0:
        return 0.0
    cum = np.cumsum(rel)
    precision_at = cum / (np.arange(len(rel)) + 1.0)
    return float((precision_at * rel).sum() / rel.sum())


def mean_average_precision(vectors: np.ndarray, labels: np.ndarray) -> float:
    labels = np.asarray(labels)
    aps = []
    for i in range(len(vectors)):
        order, _ = cosine_rank(vectors[i], vectors)
        order = order[order != i]
        aps.append(average_precision(labels[order], labels[i]))
    return float(np.mean(aps)) if aps else 0.0


# ---------------------------------------------------------------------------
# checkpoint and descriptor-store files
# ---------------------------------------------------------------------------

def _checkpoint_record(cfg: PipelineConfig, params: Params) -> dict:
    return {
        "layout_version": LAYOUT_VERSION,
        "config": asdict(cfg),
        "tensors": {k: v.tolist() for k, v in params.tensors.items()},
        "masks": {k: v.tolist() for k, v in params.masks.items()},
    }


def save_checkpoint_json(path, cfg: PipelineConfig, params: Params) -> None:
    with open(path, "w") as fh:
        json.dump(_checkpoint_record(cfg, params), fh)


def _params_from_record(record: dict) -> tuple[PipelineConfig, Params]:
    if record.get("layout_version") != LAYOUT_VERSION:
        raise ValueError(f"unsupported layout version {record.get('layout_version')!r}")
    cfg = PipelineConfig(**record["config"])
    params = Params({k: np.asarray(v, dtype=float) for k, v in record["tensors"].items()},
                    {k: np.asarray(v, dtype=float) for k, v in record["masks"].items()})
    return cfg, params


def load_checkpoint_json(path) -> tuple[PipelineConfig, Params]:
    with open(path) as fh:
        return _params_from_record(json.load(fh))


def save_checkpoint_binary(path, cfg: PipelineConfig, params: Params) -> None:
    """Magic ``ZCK1``, length-prefixed JSON header, then packed float64 blocks."""
    header = {
        "layout_version": LAYOUT_VERSION,
        "config": asdict(cfg),
        "tensors": {k: list(v.shape) for k, v in params.tensors.items()},
        "masks": {k: list(v.shape) for k, v in params.masks.items()},
    }
    blob = json.dumps(header).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC_CHECKPOINT)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for k in sorted(params.tensors):
            fh.write(params.tensors[k].astype("<f8").tobytes())
        for k in sorted(params.masks):
            fh.write(params.masks[k].astype("<f8").tobytes())


def load_checkpoint_binary(path) -> tuple[PipelineConfig, Params]:
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC_CHECKPOINT:
            raise ValueError("not a checkpoint file")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(hlen))
        if header.get("layout_version") != LAYOUT_VERSION:
            raise ValueError("unsupported layout version")
        tensors = {}
        for k in sorted(header["tensors"]):
            shape = tuple(header["tensors"][k])
            n = int(np.prod(shape)) if shape else 1
            tensors[k] = np.frombuffer(fh.read(8 * n), dtype="<f8").reshape(shape).astype(float)
        masks = {}
        for k in sorted(header["masks"]):
            shape = tuple(header["masks"][k])
            n = int(np.prod(shape)) if shape else 1
            masks[k] = np.frombuffer(fh.read(8 * n), dtype="<f8").reshape(shape).astype(float)
    return PipelineConfig(**header["config"]), Params(tensors, masks)


def save_descriptor_store(path, records: list[dict]) -> None:
    """One JSON record per line: ``{"id", "label", "vector"}``."""
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps({"id": rec["id"], "label": rec["label"],
                                 "vector": list(map(float, rec["vector"]))}) + "\n")


def load_descriptor_store(path) -> list[dict]:
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rec = json.loads(line)
                rec["vector"] = np.asarray(rec["vector"], dtype=float)
                records.append(rec)
    return records
