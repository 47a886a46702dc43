"""ImputeINR model: configuration, structure resolution, weights, forward pass and checkpoints."""
from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .clustering import ClusterPartition, agglomerate, identity_partition, permutation_from_clusters, similarity_matrix
from .data import StandardizationStats, TimeSeriesWindow, merge_imputed, standardize
from .encoder import EncoderConfig, encoder_input, encoder_shapes, multiscale_conv, patchify_embed
from .errors import CheckpointError, ShapeError, WindowTooLarge
from .hypernet import (HyperNetConfig, block_shapes, project_tokens, sinusoidal_positions,
                       token_bank_shapes, transformer_forward)
from .inr import InrConfig, InrParams, query_series

FORMAT_VERSION = 1
MAGIC = b"IINRCKPT"
PROJ_INIT_GAIN = 0.1


@dataclass(frozen=True)
class ModelConfig:
    """Every architectural hyperparameter plus the three ablation switches."""

    kernel_sizes: tuple[int, ...] = (3, 5, 7)
    channels_per_scale: int = 16
    patch_len: int = 8
    d_model: int = 64
    n_blocks: int = 6
    n_heads: int = 4
    ff_mult: int = 4
    trend_degree: int = 3
    n_freqs: int = 8
    hidden: int = 16
    n_global: int = 1
    n_group: int = 1
    activation: str = "sine"
    omega0: float = 30.0
    epsilon: float = 0.5
    multi_scale: bool = True
    clustering: bool = True
    grouping: bool = True
    # Fixed cluster assignment; bypasses the clusterer when set.
    assignment: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "kernel_sizes", tuple(int(k) for k in self.kernel_sizes))
        if self.assignment is not None:
            object.__setattr__(self, "assignment", tuple(int(a) for a in self.assignment))

    def encoder(self) -> EncoderConfig:
        kernels = self.kernel_sizes if self.multi_scale else self.kernel_sizes[:1]
        return EncoderConfig(kernels, self.channels_per_scale, self.patch_len, self.d_model)

    def hypernet(self) -> HyperNetConfig:
        return HyperNetConfig(self.n_blocks, self.d_model, self.n_heads, self.ff_mult)

    def inr(self) -> InrConfig:
        return InrConfig(self.trend_degree, self.n_freqs, self.hidden, self.n_global,
                         self.n_group, self.activation, self.omega0)

    @property
    def flags(self) -> tuple[bool, bool, bool]:
        return (self.multi_scale, self.clustering, self.grouping)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kernel_sizes"] = list(self.kernel_sizes)
        d["assignment"] = None if self.assignment is None else list(self.assignment)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: (tuple(v) if isinstance(v, list) else v) for k, v in d.items() if k in known})


@dataclass
class Structure:
    """Dataset-level layout: variable order fed to the encoder and the residual group sizes."""

    order: ClusterPartition
    group_sizes: list[int]
    clusters: ClusterPartition

    def to_dict(self) -> dict:
        return {"pi": self.order.pi.tolist(), "order_assignment": self.order.assignment.tolist(),
                "group_sizes": list(self.group_sizes), "clusters": self.clusters.to_json()}

    @classmethod
    def from_dict(cls, d: dict) -> "Structure":
        order = ClusterPartition(d["order_assignment"], d["pi"])
        c = d["clusters"]
        return cls(order, list(d["group_sizes"]), ClusterPartition(c["assignment"], c["pi"]))


def cluster_series(series: TimeSeriesWindow, epsilon: float) -> ClusterPartition:
    """Cluster the standardized full series once."""
    z, _ = standardize(series)
    return agglomerate(similarity_matrix(z.values, z.mask), epsilon)


def resolve_structure(cfg: ModelConfig, series: TimeSeriesWindow) -> Structure:
    """Turn the ablation switches into a concrete variable order and group layout.

    clustering on: variables are reordered so clusters are contiguous.
    clustering off: original order; with grouping on, groups keep the cluster
    size profile but take contiguous runs of the original order.
    grouping off: a single residual group over all variables.
    """
    n = series.n_vars
    if cfg.assignment is not None:
        if len(cfg.assignment) != n:
            raise ShapeError(f"assignment has {len(cfg.assignment)} entries for {n} variables")
        clusters = permutation_from_clusters(ClusterPartition(cfg.assignment))
    elif cfg.clustering or cfg.grouping:
        clusters = cluster_series(series, cfg.epsilon)
    else:
        clusters = identity_partition(n)
    order = clusters if cfg.clustering else identity_partition(n)
    sizes = clusters.sizes if cfg.grouping else [n]
    return Structure(order, sizes, clusters)


def init_weights(cfg: ModelConfig, n_vars: int, group_sizes, seed: int) -> dict[str, np.ndarray]:
    """Fan-in uniform for affine/conv weights (scaled down for token projections),
    N(0, 0.02) for INR tokens, unit LayerNorm gains, zero biases."""
    rng = np.random.default_rng(seed)
    shapes = dict(encoder_shapes(cfg.encoder(), n_vars))
    shapes.update(block_shapes(cfg.hypernet()))
    shapes.update(token_bank_shapes(cfg.hypernet(), cfg.inr().blocks(group_sizes)))
    weights = {}
    for name, shape in shapes.items():
        leaf = name.rsplit(".", 1)[-1]
        if name == "inr_tokens":
            weights[name] = rng.normal(0.0, 0.02, shape)
        elif leaf == "g":
            weights[name] = np.ones(shape)
        elif len(shape) == 1:
            weights[name] = np.zeros(shape)
        else:
            fan_in = int(np.prod(shape[1:])) if name.startswith("conv") else shape[0]
            bound = 1.0 / np.sqrt(fan_in)
            if name.startswith("proj"):
                # small INR parameters at init; larger values make the sine layers diverge under ADAM
                bound *= PROJ_INIT_GAIN
            weights[name] = rng.uniform(-bound, bound, shape)
    return weights


@dataclass
class PreparedWindow:
    """A window in model space: reordered and standardized."""

    window: TimeSeriesWindow
    stats: StandardizationStats


class ImputeINR:
    def __init__(self, cfg: ModelConfig, structure: Structure, weights: dict[str, np.ndarray],
                 variable_names=None, meta: dict | None = None):
        self.cfg = cfg
        self.meta = dict(meta or {})
        self.structure = structure
        self.weights = weights
        self.variable_names = list(variable_names) if variable_names else None
        self.inr_config = cfg.inr()
        self.inr_blocks = self.inr_config.blocks(structure.group_sizes)

    @classmethod
    def build(cls, cfg: ModelConfig, series: TimeSeriesWindow, seed: int = 0) -> "ImputeINR":
        structure = resolve_structure(cfg, series)
        weights = init_weights(cfg, series.n_vars, structure.group_sizes, seed)
        return cls(cfg, structure, weights, series.variable_names)

    @property
    def n_vars(self) -> int:
        return len(self.structure.order.pi)

    # -- forward ---------------------------------------------------------
    def prepare(self, w: TimeSeriesWindow) -> PreparedWindow:
        if w.n_vars != self.n_vars:
            raise ShapeError(f"model expects {self.n_vars} variables, window has {w.n_vars}")
        pi = self.structure.order.pi
        reordered = TimeSeriesWindow(w.values[pi], w.mask[pi], [w.variable_names[i] for i in pi], w.t_grid)
        z, stats = standardize(reordered)
        return PreparedWindow(z, stats)

    def inr_params(self, prepared: TimeSeriesWindow, weights=None, record=None) -> InrParams:
        """Hypernetwork forward: encoder -> transformer -> per-token projections."""
        weights = self.weights if weights is None else weights
        enc = self.cfg.encoder()
        x_prime = encoder_input(prepared.values, prepared.mask)
        feats = multiscale_conv(x_prime, enc, weights)
        tokens = patchify_embed(feats, enc, weights)
        tokens = tokens + sinusoidal_positions(tokens.shape[0], self.cfg.d_model)
        out = transformer_forward(tokens, weights["inr_tokens"], weights, self.cfg.hypernet(), record)
        blocks = project_tokens(out, weights, self.inr_blocks)
        return InrParams.from_blocks(self.inr_config, self.structure.group_sizes, blocks)

    def predict_standardized(self, prepared: TimeSeriesWindow, weights=None, t_grid=None):
        params = self.inr_params(prepared, weights)
        return query_series(params, prepared.t_grid if t_grid is None else t_grid)

    def reconstruct(self, w: TimeSeriesWindow, t_grid=None) -> np.ndarray:
        """Model output in original variable order and units at ``t_grid`` (default: window grid)."""
        prep = self.prepare(w)
        pred = ad.value(self.predict_standardized(prep.window, t_grid=t_grid))
        pred = prep.stats.invert(pred)
        return pred[self.structure.order.inverse]

    def impute(self, w: TimeSeriesWindow) -> np.ndarray:
        """Fill missing cells; observed cells are returned bit-exact."""
        return merge_imputed(w, self.reconstruct(w))

    def impute_series(self, series: TimeSeriesWindow, window: int) -> np.ndarray:
        """Impute a series of any length >= ``window``.

        Windows tile the series with stride ``window``; a final window is
        aligned to the end when the length is not a multiple.  Cells covered
        twice take the average of both reconstructions.
        """
        T = series.length
        if T < window:
            raise WindowTooLarge(f"series length {T} is shorter than the model window {window}")
        starts = list(range(0, T - window + 1, window))
        if starts[-1] + window < T:
            starts.append(T - window)
        total = np.zeros_like(series.values, dtype=np.float64)
        count = np.zeros(T)
        for s in starts:
            sl = slice(s, s + window)
            w = TimeSeriesWindow(series.values[:, sl], series.mask[:, sl], series.variable_names)
            total[:, sl] += self.reconstruct(w)
            count[sl] += 1
        return merge_imputed(series, total / count)

    # -- persistence -----------------------------------------------------
    def header(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "config": self.cfg.to_dict(),
            "structure": self.structure.to_dict(),
            "variable_names": self.variable_names,
            "tensors": [[name, list(arr.shape)] for name, arr in self.weights.items()],
            "meta": self.meta,
        }

    def save(self, path) -> None:
        head = json.dumps(self.header(), sort_keys=True).encode("utf-8")
        flat = np.concatenate([a.ravel() for a in self.weights.values()]).astype("<f8")
        with Path(path).open("wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<Q", len(head)))
            fh.write(head)
            fh.write(flat.tobytes())

    @classmethod
    def load(cls, path) -> "ImputeINR":
        raw = Path(path).read_bytes()
        if raw[:8] != MAGIC:
            raise CheckpointError(f"{path}: not an ImputeINR checkpoint")
        (n,) = struct.unpack("<Q", raw[8:16])
        try:
            head = json.loads(raw[16:16 + n].decode("utf-8"))
        except ValueError as exc:
            raise CheckpointError(f"{path}: corrupt header") from exc
        if head.get("format_version") != FORMAT_VERSION:
            raise CheckpointError(f"{path}: format version {head.get('format_version')} != {FORMAT_VERSION}")
        flat = np.frombuffer(raw[16 + n:], dtype="<f8")
        weights, offset = {}, 0
        for name, shape in head["tensors"]:
            size = int(np.prod(shape))
            if offset + size > flat.size:
                raise CheckpointError(f"{path}: truncated weight array")
            weights[name] = flat[offset:offset + size].reshape(shape).astype(np.float64)
            offset += size
        if offset != flat.size:
            raise CheckpointError(f"{path}: trailing bytes after weights")
        return cls(ModelConfig.from_dict(head["config"]), Structure.from_dict(head["structure"]),
                   weights, head.get("variable_names"), head.get("meta"))
