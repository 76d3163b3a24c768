"""Adversarially trained graph autoencoder.

The encoder maps adjacency rows to ``d``-dimensional embeddings and the
decoder reconstructs the rows. One critic per sensitive attribute scores
embeddings; its *gap* is the mean score over group-A rows minus the mean
over group-B rows. Critics ascend their gap (with weight clipping) while the
encoder descends ``recon + sum_k beta_k * gap_k``, pulling the two groups'
embedding distributions together.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, DataError, NumericalError
from .nn import LOSSES, MLP, Adam, MlpSpec
from .rng import SplitMix64, derive_seed

CHECKPOINT_FORMAT = "fairim-embedding/1"


@dataclass
class TrainConfig:
    embedding_dim: int = 8
    hidden: tuple[int, ...] = (128, 64)
    critic_hidden: tuple[int, ...] = (16,)
    recon_loss: str = "bce"
    lr_embedder: float = 1e-3
    lr_critic: float = 5e-4
    batch_size: int = 32
    pretrain_epochs: int = 100
    critic_pretrain_steps: int = 200
    adversarial_epochs: int = 200
    critic_steps: int = 5
    beta: float | dict = 1.0
    clip: float = 0.05

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        self.critic_hidden = tuple(int(h) for h in self.critic_hidden)
        if self.recon_loss not in LOSSES:
            raise ConfigError(f"recon_loss must be one of {sorted(LOSSES)}")
        for name in ("embedding_dim", "batch_size"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be positive")
        for name in ("pretrain_epochs", "critic_pretrain_steps", "adversarial_epochs", "critic_steps"):
            if int(getattr(self, name)) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if not self.clip > 0:
            raise ConfigError("clip must be positive")
        betas = self.beta.values() if isinstance(self.beta, dict) else [self.beta]
        if any(float(b) < 0 for b in betas):
            raise ConfigError("beta must be non-negative")

    def beta_for(self, attr: str) -> float:
        if isinstance(self.beta, dict):
            return float(self.beta.get(attr, 1.0))
        return float(self.beta)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        d["critic_hidden"] = list(self.critic_hidden)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown training option(s): {sorted(unknown)}")
        return cls(**d)


@dataclass
class EmbeddingModel:
    encoder: MLP
    decoder: MLP
    critics: dict[str, MLP]
    beta: dict[str, float]
    clip: float
    recon_loss: str = "bce"
    epoch: int = 0
    rng_state: int = 0
    training_log: list[dict] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.encoder.spec.layer_sizes[-1]

    @property
    def attribute_names(self) -> list[str]:
        return list(self.critics)

    def copy(self) -> "EmbeddingModel":
        return EmbeddingModel(
            self.encoder.copy(),
            self.decoder.copy(),
            {k: c.copy() for k, c in self.critics.items()},
            dict(self.beta),
            self.clip,
            self.recon_loss,
            self.epoch,
            self.rng_state,
            [dict(r) for r in self.training_log],
        )

    def to_dict(self) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "embedding_dim": self.dim,
            "encoder": self.encoder.to_dict(),
            "decoder": self.decoder.to_dict(),
            "critics": {k: c.to_dict() for k, c in self.critics.items()},
            "attribute_names": self.attribute_names,
            "beta": self.beta,
            "clip": self.clip,
            "recon_loss": self.recon_loss,
            "epoch": self.epoch,
            "rng_state": self.rng_state,
            "training_log": self.training_log,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EmbeddingModel":
        if d.get("format") != CHECKPOINT_FORMAT:
            raise DataError(f"not a {CHECKPOINT_FORMAT} checkpoint")
        model = cls(
            MLP.from_dict(d["encoder"]),
            MLP.from_dict(d["decoder"]),
            {k: MLP.from_dict(c) for k, c in d["critics"].items()},
            {k: float(v) for k, v in d["beta"].items()},
            float(d["clip"]),
            d["recon_loss"],
            int(d["epoch"]),
            int(d["rng_state"]),
            list(d["training_log"]),
        )
        if model.decoder.spec.layer_sizes[0] != model.dim:
            raise DataError("decoder input width does not match the embedding dimension")
        return model


def save_checkpoint(model: EmbeddingModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(model.to_dict(), fh, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path) -> EmbeddingModel:
    with open(path) as fh:
        return EmbeddingModel.from_dict(json.load(fh))


def encoder_spec(n: int, cfg: TrainConfig) -> MlpSpec:
    sizes = (n, *cfg.hidden, cfg.embedding_dim)
    return MlpSpec(sizes, ("relu",) * len(cfg.hidden) + ("identity",))


def decoder_spec(n: int, cfg: TrainConfig) -> MlpSpec:
    sizes = (cfg.embedding_dim, *reversed(cfg.hidden), n)
    return MlpSpec(sizes, ("relu",) * len(cfg.hidden) + ("sigmoid",))


def critic_spec(cfg: TrainConfig) -> MlpSpec:
    sizes = (cfg.embedding_dim, *cfg.critic_hidden, 1)
    return MlpSpec(sizes, ("relu",) * len(cfg.critic_hidden) + ("identity",))


def init_model(n: int, cfg: TrainConfig, rng_seed: int, attr_names: Sequence[str] = ()) -> EmbeddingModel:
    """Fresh model; critic weights start inside the clip box."""
    enc = MLP(encoder_spec(n, cfg), SplitMix64(derive_seed(rng_seed, 0)))
    dec = MLP(decoder_spec(n, cfg), SplitMix64(derive_seed(rng_seed, 1)))
    critics = {}
    for i, attr in enumerate(attr_names):
        c = MLP(critic_spec(cfg), SplitMix64(derive_seed(rng_seed, 2, i)))
        c.clip_(cfg.clip)
        critics[attr] = c
    beta = {a: cfg.beta_for(a) for a in attr_names}
    return EmbeddingModel(enc, dec, critics, beta, cfg.clip, cfg.recon_loss, rng_state=rng_seed & ((1 << 64) - 1))


# ---------------------------------------------------------------- batching


def make_batches(
    n: int, batch_size: int, rng: SplitMix64, groups: Mapping[str, np.ndarray] | None = None
) -> list[np.ndarray]:
    """Mini-batches of node indices for one epoch.

    Without ``groups`` this is a shuffled partition. With ``groups`` nodes are
    stratified by their joint label across attributes and dealt round-robin so
    every stratum is spread proportionally; a batch missing either group of
    some attribute then receives one randomly drawn member of that group.
    """
    if not groups:
        perm = np.array(rng.permutation(n), dtype=np.int64)
        return [perm[i : i + batch_size] for i in range(0, n, batch_size)]
    labels = list(groups.values())
    code = np.zeros(n, dtype=np.int64)
    for k, lab in enumerate(labels):
        code |= lab.astype(np.int64) << k
    order: list[int] = []
    for c in np.unique(code):
        members = np.flatnonzero(code == c).tolist()
        rng.shuffle(members)
        order += members
    nb = max(1, math.ceil(n / batch_size))
    batches: list[list[int]] = [[] for _ in range(nb)]
    for j, u in enumerate(order):
        batches[j % nb].append(u)
    for batch in batches:
        for lab in labels:
            for want in (True, False):
                if not any(lab[u] == want for u in batch):
                    pool = np.flatnonzero(lab == want)
                    batch.append(int(pool[rng.randbelow(len(pool))]))
    return [np.array(b, dtype=np.int64) for b in batches]


def _check_groups(groups: Mapping[str, np.ndarray], n: int) -> dict[str, np.ndarray]:
    out = {}
    for attr, lab in groups.items():
        lab = np.asarray(lab, dtype=bool)
        if lab.shape != (n,):
            raise DataError(f"labels for {attr!r} must cover all {n} nodes")
        if lab.all() or not lab.any():
            raise DataError(f"attribute {attr!r} has an empty group")
        out[attr] = lab
    return out


# ---------------------------------------------------------------- losses


def critic_gap(critic: MLP, z_a: np.ndarray, z_b: np.ndarray) -> float:
    """Mean critic score on ``z_a`` minus mean score on ``z_b``."""
    if len(z_a) == 0 or len(z_b) == 0:
        raise DataError("critic gap needs rows from both groups")
    return float(critic(z_a).mean() - critic(z_b).mean())


def _gap_and_grads(critic: MLP, z: np.ndarray, is_a: np.ndarray, scale: float = 1.0):
    """Gap over the rows of ``z`` split by ``is_a``, with param and input grads of ``scale * gap``."""
    na = int(is_a.sum())
    nb = len(is_a) - na
    if na == 0 or nb == 0:
        raise DataError("critic gap needs rows from both groups")
    scores, cache = critic.forward(z)
    s = scores[:, 0]
    gap = float(s[is_a].mean() - s[~is_a].mean())
    g = np.where(is_a, scale / na, -scale / nb)[:, None]
    pgrads, zgrad = critic.backward(cache, g)
    return gap, pgrads, zgrad


def recon_loss_and_grads(model: EmbeddingModel, xb: np.ndarray):
    """Reconstruction loss, decoder/encoder grads, and cached embeddings for a batch."""
    z, enc_cache = model.encoder.forward(xb)
    xh, dec_cache = model.decoder.forward(z)
    loss, g_xh = LOSSES[model.recon_loss](xh, xb)
    dec_grads, g_z = model.decoder.backward(dec_cache, g_xh)
    return loss, z, enc_cache, dec_grads, g_z


def embedder_loss_and_grads(model: EmbeddingModel, xb: np.ndarray, batch_groups: Mapping[str, np.ndarray]):
    """Composite embedder loss ``recon + sum_k beta_k * gap_k`` and its gradients.

    Returns ``(total, recon, gaps, encoder_grads, decoder_grads)``. Attributes
    with ``beta == 0`` contribute nothing to the gradient.
    """
    recon, z, enc_cache, dec_grads, g_z = recon_loss_and_grads(model, xb)
    total = recon
    gaps = {}
    for attr, is_a in batch_groups.items():
        beta = model.beta[attr]
        if beta == 0.0:
            gaps[attr] = critic_gap(model.critics[attr], z[is_a], z[~is_a])
            continue
        gap, _, gz = _gap_and_grads(model.critics[attr], z, is_a, beta)
        gaps[attr] = gap
        total += beta * gap
        g_z = g_z + gz
    enc_grads, _ = model.encoder.backward(enc_cache, g_z)
    return total, recon, gaps, enc_grads, dec_grads


def _finite(value: float, phase: str, epoch: int) -> None:
    if not math.isfinite(value):
        raise NumericalError(f"{phase}: non-finite loss at epoch {epoch}")


# ---------------------------------------------------------------- training


def pretrain_autoencoder(
    x: np.ndarray,
    cfg: TrainConfig,
    rng_seed: int,
    attr_names: Sequence[str] = (),
    model: EmbeddingModel | None = None,
    groups: Mapping[str, np.ndarray] | None = None,
    epochs: int | None = None,
) -> EmbeddingModel:
    """Plain autoencoder training by mini-batch Adam on the reconstruction loss.

    A new model is initialised from ``rng_seed`` unless ``model`` is given, in
    which case it is trained further in place. ``groups`` switches batching to
    the stratified scheme used by :func:`adversarial_train`.
    """
    n = x.shape[0]
    if model is None:
        model = init_model(n, cfg, rng_seed, attr_names)
    groups = _check_groups(groups, n) if groups else None
    epochs = cfg.pretrain_epochs if epochs is None else epochs
    rng = SplitMix64(derive_seed(rng_seed, 10))
    params = model.encoder.params + model.decoder.params
    opt = Adam(params, cfg.lr_embedder)
    for _ in range(epochs):
        model.epoch += 1
        losses = []
        for idx in make_batches(n, cfg.batch_size, rng, groups):
            loss, _, enc_cache, dec_grads, g_z = recon_loss_and_grads(model, x[idx])
            enc_grads, _ = model.encoder.backward(enc_cache, g_z)
            opt.step(params, enc_grads + dec_grads)
            model.encoder.touch()
            model.decoder.touch()
            losses.append(loss)
        mean = float(np.mean(losses))
        _finite(mean, "pretrain", model.epoch)
        model.training_log.append({"phase": "pretrain", "epoch": model.epoch, "recon": mean, "embedder_total": mean})
    model.rng_state = rng.state
    return model


def _critic_ascent(critic: MLP, opt: Adam, z: np.ndarray, is_a: np.ndarray, clip: float) -> float:
    gap, grads, _ = _gap_and_grads(critic, z, is_a)
    opt.step(critic.params, [-g for g in grads])
    critic.clip_(clip)
    return gap


def pretrain_critics(
    model: EmbeddingModel,
    z: np.ndarray,
    groups: Mapping[str, np.ndarray],
    cfg: TrainConfig,
    rng_seed: int = 0,
    steps: int | None = None,
) -> EmbeddingModel:
    """Full-batch gradient ascent of each critic's gap on fixed embeddings ``z``.

    Weights are clipped to ``[-clip, clip]`` after every step. ``rng_seed`` is
    accepted for interface symmetry; the full-batch updates draw no randomness.
    """
    groups = _check_groups(groups, len(z))
    steps = cfg.critic_pretrain_steps if steps is None else steps
    for attr, is_a in groups.items():
        critic = model.critics[attr]
        opt = Adam(critic.params, cfg.lr_critic)
        gap = math.nan
        for _ in range(steps):
            gap = _critic_ascent(critic, opt, z, is_a, model.clip)
        if steps:
            _finite(gap, f"critic pretrain ({attr})", model.epoch)
            model.training_log.append(
                {"phase": "critic_pretrain", "epoch": model.epoch, f"gap_{attr}": critic_gap(critic, z[is_a], z[~is_a])}
            )
    return model


def adversarial_train(
    model: EmbeddingModel,
    x: np.ndarray,
    groups: Mapping[str, np.ndarray],
    cfg: TrainConfig,
    rng_seed: int,
    epochs: int | None = None,
) -> EmbeddingModel:
    """Alternate embedder and critic updates over stratified mini-batches.

    Per batch: one Adam step of the encoder/decoder on
    ``recon + sum_k beta_k * gap_k``; then, on embeddings recomputed with the
    updated encoder, ``cfg.critic_steps`` ascent steps per critic, each
    followed by clipping. Trains ``model`` in place and returns it.
    """
    n = x.shape[0]
    groups = _check_groups(groups, n)
    missing = set(groups) - set(model.critics)
    if missing:
        raise ConfigError(f"model has no critic for {sorted(missing)}")
    epochs = cfg.adversarial_epochs if epochs is None else epochs
    rng = SplitMix64(derive_seed(rng_seed, 10))
    params = model.encoder.params + model.decoder.params
    opt = Adam(params, cfg.lr_embedder)
    critic_opts = {a: Adam(model.critics[a].params, cfg.lr_critic) for a in groups}
    for _ in range(epochs):
        model.epoch += 1
        rec, tot = [], []
        gaps = {a: [] for a in groups}
        for idx in make_batches(n, cfg.batch_size, rng, groups):
            xb = x[idx]
            bg = {a: lab[idx] for a, lab in groups.items()}
            total, recon, g, enc_grads, dec_grads = embedder_loss_and_grads(model, xb, bg)
            opt.step(params, enc_grads + dec_grads)
            model.encoder.touch()
            model.decoder.touch()
            rec.append(recon)
            tot.append(total)
            for a in groups:
                gaps[a].append(g[a])
            zb = model.encoder(xb)
            for a, is_a in bg.items():
                for _ in range(cfg.critic_steps):
                    _critic_ascent(model.critics[a], critic_opts[a], zb, is_a, model.clip)
        row = {"phase": "adversarial", "epoch": model.epoch, "recon": float(np.mean(rec))}
        row.update({f"gap_{a}": float(np.mean(v)) for a, v in gaps.items()})
        row["embedder_total"] = float(np.mean(tot))
        _finite(row["embedder_total"], "adversarial", model.epoch)
        model.training_log.append(row)
    model.rng_state = rng.state
    return model


def embed(model: EmbeddingModel, x: np.ndarray) -> np.ndarray:
    """Embedding matrix: row ``u`` is the encoder image of adjacency row ``u``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.encoder.spec.layer_sizes[0]:
        raise DataError(f"feature width {x.shape[-1]} does not match encoder input {model.encoder.spec.layer_sizes[0]}")
    z = model.encoder(x)
    if not np.all(np.isfinite(z)):
        raise NumericalError("embedding contains non-finite entries")
    return z


def train_plain_embedding(x: np.ndarray, cfg: TrainConfig, rng_seed: int) -> EmbeddingModel:
    return pretrain_autoencoder(x, cfg, derive_seed(rng_seed, 1))


def train_fair_embedding(
    x: np.ndarray, groups: Mapping[str, np.ndarray], cfg: TrainConfig, rng_seed: int
) -> EmbeddingModel:
    """Full adversarial pipeline: pretrain autoencoder, pretrain critics, co-train."""
    groups = _check_groups(groups, x.shape[0])
    model = pretrain_autoencoder(x, cfg, derive_seed(rng_seed, 1), attr_names=list(groups))
    pretrain_critics(model, embed(model, x), groups, cfg, derive_seed(rng_seed, 2))
    return adversarial_train(model, x, groups, cfg, derive_seed(rng_seed, 3))


def loss_rows(model: EmbeddingModel) -> tuple[list[str], list[list]]:
    """Per-epoch loss table ``epoch, recon, gap_<attr>..., embedder_total``."""
    gap_cols = [f"gap_{a}" for a in model.attribute_names]
    header = ["phase", "epoch", "recon", *gap_cols, "embedder_total"]
    rows = []
    for rec in model.training_log:
        if rec["phase"] == "critic_pretrain":
            continue
        rows.append([rec.get(h, "") for h in header])
    return header, rows
