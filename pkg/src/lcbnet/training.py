"""Adam training with the two-phase phrase schedule."""
import ast
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np

from .biasing import (SimulationConfig, build_long_context, label_bias_tokens,
                      mask_context, simulate_phrases)
from .errors import ConfigError
from .numerics import compute_gradients, dropout_scope


@dataclass
class TrainConfig:
    epochs: int = 75
    batch_size: int = 8
    lr: float = 1e-3
    warmup_steps: int = 20000
    schedule: str = "noam"       # "noam": linear warmup then 1/sqrt decay; "constant": warmup then flat
    beta1: float = 0.9
    beta2: float = 0.98
    adam_eps: float = 1e-9
    grad_clip: float = 5.0       # global norm, 0 disables
    mask_prob: float = 0.15
    simulated_epochs: int = 50   # leading epochs that never use provided lists
    provided_mix: float = 0.5    # chance an utterance uses its own list afterwards
    seed: int = 0
    workers: int = 1

    def validate(self):
        if self.epochs < 0:
            raise ConfigError("train.epochs must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("train.batch_size must be >= 1")
        if self.lr <= 0:
            raise ConfigError("train.lr must be > 0")
        if self.warmup_steps < 0:
            raise ConfigError("train.warmup_steps must be >= 0")
        if self.schedule not in ("noam", "constant"):
            raise ConfigError(f"train.schedule must be 'noam' or 'constant', got {self.schedule!r}")
        if self.workers < 1:
            raise ConfigError("train.workers must be >= 1")
        for name in ("mask_prob", "provided_mix"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"train.{name} must lie in [0, 1]")
        return self


class Adam:
    def __init__(self, params, cfg):
        self.params = list(params)
        self.cfg = cfg
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.step_count = 0

    def learning_rate(self):
        """Peak ``lr`` reached linearly at ``warmup_steps``; "noam" then decays as 1/sqrt(step)."""
        step, warm = self.step_count, self.cfg.warmup_steps
        if warm and step < warm:
            return self.cfg.lr * step / warm
        if self.cfg.schedule == "noam":
            return self.cfg.lr * np.sqrt(max(warm, 1) / step)
        return self.cfg.lr

    def step(self, grads):
        c = self.cfg
        self.step_count += 1
        lr = self.learning_rate()
        b1c = 1 - c.beta1 ** self.step_count
        b2c = 1 - c.beta2 ** self.step_count
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= c.beta1
            m += (1 - c.beta1) * g
            v *= c.beta2
            v += (1 - c.beta2) * g * g
            p.data -= lr * (m / b1c) / (np.sqrt(v / b2c) + c.adam_eps)
        return lr


def clip_global_norm(grads, limit):
    norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if limit and norm > limit:
        scale = limit / norm
        grads = [g * scale for g in grads]
    return grads, norm


@dataclass
class EpochStats:
    epoch: int
    phase: int
    loss: float = 0.0
    ctc: float = 0.0
    ce: float = 0.0
    bce: float = 0.0
    ctc_infeasible: int = 0
    lr: float = 0.0
    grad_norm: float = 0.0
    utterances: int = 0
    provided_lists: int = 0
    extra: dict = field(default_factory=dict)

    def line(self):
        vals = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "extra"}
        vals.update(self.extra)
        return " ".join(f"{k}={v!r}" for k, v in vals.items())


def batch_contexts(batch, vocab, cfg, sim_cfg, rng, use_provided, sim_rng=None):
    """Long contexts for one batch; returns (contexts, n_provided)."""
    simulated = simulate_phrases([u.reference for u in batch], vocab, sim_cfg, sim_rng or rng)
    out, n_provided = [], 0
    for utt in batch:
        phrases = simulated
        if use_provided and utt.phrases is not None and rng.random() < cfg.provided_mix:
            phrases = utt.phrases
            n_provided += 1
        ctx = build_long_context(phrases, vocab, rng)
        ctx = label_bias_tokens(ctx, utt.transcript)
        out.append(mask_context(ctx, cfg.mask_prob, rng, vocab))
    return out, n_provided


def _utterance_grads(model, params, utt, ctx, seed):
    with dropout_scope(np.random.default_rng(seed)):
        total, _, parts = model.loss(utt.features, utt.reference.ids, ctx)
    grads = compute_gradients(total)
    return [grads[id(p)][1] if id(p) in grads else None for p in params], float(total.data), parts


class Trainer:
    """Mini-batch Adam; per-utterance gradients are summed in batch order so the
    result does not depend on ``workers``."""

    def __init__(self, model, cfg, sim_cfg=None):
        self.model = model
        self.cfg = cfg.validate()
        self.sim_cfg = sim_cfg or SimulationConfig()
        self.params = model.parameters()
        self.opt = Adam(self.params, cfg)
        self.rng = np.random.default_rng(cfg.seed)
        self.sim_rng = np.random.default_rng(self.sim_cfg.rng_seed)
        self.epoch = 0
        self._pool = ThreadPoolExecutor(cfg.workers) if cfg.workers > 1 else None

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def train_epoch(self, data):
        cfg = self.cfg
        phase = 1 if self.epoch < cfg.simulated_epochs else 2
        stats = EpochStats(self.epoch + 1, phase)
        order = self.rng.permutation(len(data))
        for start in range(0, len(order), cfg.batch_size):
            batch = [data[i] for i in order[start:start + cfg.batch_size]]
            ctxs, n_prov = batch_contexts(batch, self.model.vocab, cfg, self.sim_cfg,
                                          self.rng, phase == 2, self.sim_rng)
            stats.provided_lists += n_prov
            seeds = self.rng.integers(0, 2**63, size=len(batch))
            jobs = list(zip(batch, ctxs, seeds))
            if self._pool is None:
                results = [_utterance_grads(self.model, self.params, *job) for job in jobs]
            else:
                results = list(self._pool.map(
                    lambda job: _utterance_grads(self.model, self.params, *job), jobs))
            summed = [np.zeros_like(p.data) for p in self.params]
            for grads, loss, parts in results:
                for acc, g in zip(summed, grads):
                    if g is not None:
                        acc += g
                stats.loss += loss
                stats.ce += parts["ce"]
                stats.bce += parts["bce"]
                if parts["ctc_feasible"]:
                    stats.ctc += parts["ctc"]
                else:
                    stats.ctc_infeasible += 1
            summed = [g / len(batch) for g in summed]
            summed, stats.grad_norm = clip_global_norm(summed, cfg.grad_clip)
            stats.lr = self.opt.step(summed)
            stats.utterances += len(batch)
        n = max(stats.utterances, 1)
        stats.loss /= n
        stats.ce /= n
        stats.bce /= n
        stats.ctc /= max(stats.utterances - stats.ctc_infeasible, 1)
        self.epoch += 1
        return stats

    def fit(self, data, log=None, on_epoch_end=None):
        """Run the remaining epochs. ``on_epoch_end(stats)`` returning True stops early."""
        history = []
        try:
            while self.epoch < self.cfg.epochs:
                stats = self.train_epoch(data)
                history.append(stats)
                stop = on_epoch_end is not None and on_epoch_end(stats)
                if log:
                    log(stats.line())
                if stop:
                    break
        finally:
            self.close()
        return history


def parse_log_line(line):
    """Inverse of ``EpochStats.line``: ``{"epoch": 1, "loss": 0.5, ...}``."""
    out = {}
    for token in line.split():
        key, _, value = token.partition("=")
        out[key] = ast.literal_eval(value)
    return out
