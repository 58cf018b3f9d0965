"""The training loop: one discriminator update then one generator/encoder
update per step, each with its own Adam state."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .. import losses
from ..errors import ConfigError, ContractError
from ..losses import LossReport, LossWeights
from ..nets import (
    ModelParams,
    NetConfig,
    decode,
    discriminate,
    encode_content,
    encode_style,
    init_params,
    pool_content,
    to_batch,
)
from ..nets.params import GENERATOR_NETWORKS
from ..tensor import RngState, Tensor, grad
from ..tensor import functional as F
from ..utilities.perf_timer import perf_timer
from ..utilities.tomlconfig import TomlConfig
from .adam import AdamConfig, AdamState, adam_step
from .checkpoint import Checkpoint
from .corpus import CorpusSample

log = logging.getLogger(__name__)

DISENTANGLE_MODES = ("content", "pixel")


@dataclass(frozen=True)
class TrainConfig:
    weights: LossWeights = field(default_factory=LossWeights)
    adam: AdamConfig = field(default_factory=AdamConfig)
    net: NetConfig = field(default_factory=NetConfig)
    iters: int = 3000
    batch_size: int = 4
    seed: int = 0
    log_every: int = 50
    # where the disentanglement loss is measured: content codes or object pixels
    disentangle: str = "content"

    def __post_init__(self):
        if self.iters < 1:
            raise ConfigError(f"iters must be at least 1, got {self.iters}")
        if self.batch_size < 2:
            raise ConfigError(f"batch_size must be at least 2 (content codes are swapped within a batch), got {self.batch_size}")
        if self.log_every < 1:
            raise ConfigError(f"log_every must be at least 1, got {self.log_every}")
        if self.disentangle not in DISENTANGLE_MODES:
            raise ConfigError(f"disentangle must be one of {DISENTANGLE_MODES}, got '{self.disentangle}'")

    @classmethod
    def from_dict(cls, values: Mapping) -> "TrainConfig":
        values = dict(values)
        try:
            weights = LossWeights.from_dict(values.pop("weights", {}))
            adam = AdamConfig(halve_every=values.pop("halve_every", AdamConfig.halve_every), **values.pop("adam", {}))
            net = NetConfig.from_dict(values.pop("net", {}))
            return cls(weights=weights, adam=adam, net=net, **values)
        except TypeError as error:
            raise ConfigError(f"train config: {error}") from None

    @classmethod
    def load(cls, override=None, use_user_config: bool = True, **overrides) -> "TrainConfig":
        """Bundled defaults <- user config <- `override` file <- keyword overrides."""
        values = TomlConfig("train", override, use_user_config).as_dict()
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls.from_dict(values)


@dataclass(frozen=True)
class TrainState:
    params: ModelParams
    gen_state: AdamState
    disc_state: AdamState
    iteration: int
    rng: RngState

    @classmethod
    def initial(cls, config: TrainConfig) -> "TrainState":
        root = RngState(config.seed)
        params = init_params(config.net, root.fork(0))
        return cls(
            params=params,
            gen_state=AdamState.zeros(params.group(*GENERATOR_NETWORKS)),
            disc_state=AdamState.zeros(params.group("disc")),
            iteration=0,
            rng=root.fork(1),
        )

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint) -> "TrainState":
        return cls(ckpt.params, ckpt.gen_state, ckpt.disc_state, ckpt.iteration, ckpt.rng)

    def to_checkpoint(self) -> Checkpoint:
        return Checkpoint(self.params, self.gen_state, self.disc_state, self.iteration, self.rng)


@dataclass(frozen=True)
class StepOutcome:
    report: LossReport
    state: TrainState
    grad_norms: dict[str, float]


@dataclass(frozen=True)
class TrainRun:
    state: TrainState
    reports: list[LossReport]


def _without_grad(params: ModelParams, networks: Sequence[str]) -> ModelParams:
    """View of `params` in which the tensors of `networks` are constants."""
    detached = {name: t.detach() for name, t in params.group(*networks).items()}
    return ModelParams(params.config, {**params, **detached})


def _batch_roll(t: Tensor, index: np.ndarray) -> Tensor:
    """Batch entries of `t` in `index` order, keeping the gradient path."""
    return F.concat([F.narrow(t, 0, int(i), int(i) + 1) for i in index], axis=0)


def _generator_terms(
    params: ModelParams,
    x: Tensor,
    masks: np.ndarray,
    style_prior: Tensor,
    rand_index: np.ndarray,
    disentangle: str = "content",
):
    """All generator-side terms except the adversarial one, plus the fake batch.

    Every term is evaluated so it can be reported; only terms with a nonzero
    weight later enter the objective, so the others never reach a gradient.
    """
    terms = {}
    content = encode_content(x, params)
    pooled = pool_content(content)

    # image and object reconstruction
    reconstruction = decode(content, encode_style(x, params), params, pooled, pooled)
    terms["g_m"] = losses.image_recon_loss(reconstruction, x)
    object_style = encode_style(x, params, masks)
    object_reconstruction = decode(content, object_style, params, pooled, pooled, mask=masks)
    terms["o_m"] = losses.image_recon_loss(object_reconstruction, x, masks)

    # latent reconstruction from a style drawn from the prior
    fake = decode(content, style_prior, params, pooled, pooled)
    terms["g_c"], terms["g_s"] = losses.latent_recon_losses(content, style_prior, fake, params)
    object_fake = decode(content, style_prior, params, pooled, pooled, mask=masks)
    terms["o_c"], terms["o_s"] = losses.latent_recon_losses(content, style_prior, object_fake, params, masks)

    # another image's content code supplies the target statistics
    content_rand = _batch_roll(content, rand_index)
    if disentangle == "pixel":
        rand_images = Tensor(x.data[rand_index], op="rand_images")
        terms["g_cd"] = losses.pixel_disentanglement_loss(
            x, content, style_prior, content_rand, rand_images, params, masks, masks[rand_index]
        )
    else:
        terms["g_cd"] = losses.content_disentanglement_loss(content, style_prior, content_rand, params)
    return terms, fake


def _norms(grads: Mapping[str, np.ndarray]) -> dict[str, float]:
    return {name: float(np.sqrt(np.sum(np.square(g, dtype=np.float64)))) for name, g in grads.items()}


def train_step(batch: Sequence[CorpusSample], state: TrainState, config: TrainConfig) -> StepOutcome:
    """One discriminator update followed by one generator/encoder update.

    Draws from `state.rng`: one object mask per sample, a style code per
    sample from N(0, I), and a cyclic shift pairing every sample with another
    sample's content code.
    """
    n = len(batch)
    if n < 2:
        raise ContractError(f"a training batch needs at least 2 samples, got {n}")
    gen, rng = state.rng.draw()
    params = state.params

    x = to_batch(np.stack([sample.image for sample in batch]))
    masks = np.stack([sample.objects[int(gen.integers(len(sample.objects)))].mask for sample in batch])
    style_prior = Tensor(gen.standard_normal((n, params.config.style_dim)).astype(np.float32), op="style_prior")
    rand_index = (np.arange(n) + int(gen.integers(1, n))) % n

    terms, fake = _generator_terms(params, x, masks, style_prior, rand_index, config.disentangle)

    disc_loss = losses.discriminator_loss(discriminate(x, params), discriminate(fake.detach(), params))
    disc_grads = grad(disc_loss, params.group("disc"))
    params, disc_state = adam_step(params, disc_grads, state.disc_state, config.adam, state.iteration)

    # the generator is scored by the freshly updated discriminator
    terms["gan"] = losses.generator_adversarial_loss(discriminate(fake, _without_grad(params, ("disc",))))
    total = losses.total_loss(terms, config.weights)
    generator = state.params.group(*GENERATOR_NETWORKS)
    if isinstance(total, Tensor):
        gen_grads = grad(total, generator)
    else:
        gen_grads = {name: np.zeros_like(t.data) for name, t in generator.items()}
    params, gen_state = adam_step(params, gen_grads, state.gen_state, config.adam, state.iteration)

    report = LossReport.from_terms({name: t.item() for name, t in terms.items()}, config.weights, disc_loss.item())
    next_state = TrainState(params, gen_state, disc_state, state.iteration + 1, rng)
    return StepOutcome(report, next_state, {**_norms(gen_grads), **_norms(disc_grads)})


def sample_batch(corpus: Sequence[CorpusSample], batch_size: int, gen: np.random.Generator) -> list[CorpusSample]:
    indices = gen.choice(len(corpus), size=batch_size, replace=len(corpus) < batch_size)
    return [corpus[int(i)] for i in indices]


@perf_timer()
def train(
    corpus: Sequence[CorpusSample],
    config: TrainConfig,
    state: TrainState | None = None,
    iters: int | None = None,
    on_step: Callable[[int, LossReport], None] | None = None,
) -> TrainRun:
    """Run `iters` (default `config.iters`) steps from `state` (default a fresh start)."""
    if len(corpus) < 2:
        raise ContractError(f"training needs at least 2 corpus images, got {len(corpus)}")
    state = TrainState.initial(config) if state is None else state
    if state.params.config != config.net:
        raise ConfigError("the network config does not match the parameters being trained")
    iters = config.iters if iters is None else iters

    reports = []
    for _ in range(iters):
        gen, rng = state.rng.draw()
        batch = sample_batch(corpus, config.batch_size, gen)
        outcome = train_step(batch, TrainState(state.params, state.gen_state, state.disc_state, state.iteration, rng), config)
        state = outcome.state
        reports.append(outcome.report)
        if state.iteration % config.log_every == 0:
            r = outcome.report
            log.info(
                f"iter {state.iteration}: total {r.total:.4f} g_m {r.g_m:.4f} o_m {r.o_m:.4f} "
                f"g_cd {r.g_cd:.4f} gan {r.gan:.4f} disc {r.disc:.4f}"
            )
        if on_step is not None:
            on_step(state.iteration, outcome.report)
    return TrainRun(state, reports)
