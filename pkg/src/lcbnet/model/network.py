"""The long-context biasing network: audio and context encoders joined by two cross-attentions."""
from dataclasses import dataclass

import numpy as np

from ..errors import DataError
from ..matrix_io import write_matrix
from ..numerics import DiffArray, no_grad, ops
from ..tokenizer import from_ids
from .layers import (
    CrossAttentionBlock, DecoderBlock, EncoderBlock, FeedForward, Init, LayerNorm, Linear, Module,
    MultiHeadAttention, sinusoidal_positions,
)
from .losses import ce_loss, bce_loss, ctc_loss

MIN_FRAMES = 7


def subsampled_length(frames):
    """Frames left after two stride-2 convolutions: ceil(frames / 4)."""
    return -(-(-(-frames // 2)) // 2)


def receptive_field(t):
    """Input frames ``[first, last]`` seen by encoder frame ``t`` through the subsampling convolutions."""
    return 4 * t - 3, 4 * t + 3


@dataclass
class ForwardTrace:
    h_audio: DiffArray        # [T, d]
    h_context: DiffArray      # [L, d]
    h_ac: DiffArray           # [T, d]
    h_ca: DiffArray           # [L, d]
    h_att: DiffArray          # [L, d]
    h_ffn: DiffArray          # [L, d]
    h_cov: DiffArray          # [L, d]
    alpha: DiffArray          # [L]
    ctc_logits: DiffArray     # [T, V]
    decoder_logits: DiffArray  # [U, V]
    ac_attention: np.ndarray  # [heads, T, L]
    ca_attention: np.ndarray  # [heads, L, T]


class AudioEncoder(Module):
    def __init__(self, init, cfg):
        d = cfg.d_model
        self.conv_1 = init.matrix("subsample.conv_1.kernel", 3 * cfg.feature_dim, d, shape=(3, cfg.feature_dim, d))
        self.conv_1_bias = init.zeros("subsample.conv_1.bias", d)
        self.conv_2 = init.matrix("subsample.conv_2.kernel", 3 * d, d, shape=(3, d, d))
        self.conv_2_bias = init.zeros("subsample.conv_2.bias", d)
        self.blocks = [EncoderBlock(init.sub(f"layer{i}"), cfg, conv=cfg.use_conformer_conv)
                       for i in range(cfg.audio_layers)]
        self.ln_out = LayerNorm(init, "ln_out", d, cfg.ln_eps)
        self.d_model = d
        self.feature_dim = cfg.feature_dim
        self.p = cfg.dropout

    def __call__(self, features):
        features = features if isinstance(features, DiffArray) else DiffArray(features)
        frames, dim = features.shape[-2:]
        if dim != self.feature_dim:
            raise DataError(f"feature dim {dim} != configured {self.feature_dim}")
        if frames < MIN_FRAMES:
            raise DataError(f"{frames} frames is too short for 4x subsampling (need >= {MIN_FRAMES})")
        x = ops.silu(ops.conv1d(features, self.conv_1, self.conv_1_bias, stride=2, pad=1))
        x = ops.silu(ops.conv1d(x, self.conv_2, self.conv_2_bias, stride=2, pad=1))
        x = ops.dropout(ops.add(x, sinusoidal_positions(x.shape[-2], self.d_model)), self.p)
        for block in self.blocks:
            x, _ = block(x)
        return self.ln_out(x)


class ContextEncoder(Module):
    def __init__(self, init, cfg):
        self.embedding = init.normal("embedding", (cfg.vocab_size, cfg.d_model), 1.0)
        self.blocks = [EncoderBlock(init.sub(f"layer{i}"), cfg) for i in range(cfg.context_layers)]
        self.ln_out = LayerNorm(init, "ln_out", cfg.d_model, cfg.ln_eps)
        self.positions = cfg.context_positions
        self.d_model = cfg.d_model
        self.p = cfg.dropout

    def __call__(self, ids):
        x = ops.take_rows(self.embedding, ids)
        if self.positions:
            x = ops.add(x, sinusoidal_positions(len(ids), self.d_model))
        x = ops.dropout(x, self.p)
        for block in self.blocks:
            x, _ = block(x)
        return self.ln_out(x)


class BiasingPredictor(Module):
    """Self-attention, feed-forward, windowed 1-D convolution, one sigmoid unit per context token."""

    def __init__(self, init, cfg):
        d = cfg.d_model
        self.attn = MultiHeadAttention(init.sub("attn"), d, cfg.n_heads)
        self.ln_att = LayerNorm(init, "ln_att", d, cfg.ln_eps)
        self.ffn = FeedForward(init.sub("ffn"), d, cfg.d_ffn)
        self.ln_ffn = LayerNorm(init, "ln_ffn", d, cfg.ln_eps)
        span = cfg.conv_span
        self.conv = init.matrix("conv.kernel", span * d, d, shape=(span, d, d))
        self.conv_bias = init.zeros("conv.bias", d)
        self.out = Linear(init, "out", d, 1)
        self.p = cfg.dropout

    def __call__(self, h_ca):
        a, _ = self.attn(h_ca, h_ca)
        h_att = self.ln_att(ops.add(h_ca, ops.dropout(a, self.p)))
        h_ffn = self.ln_ffn(ops.add(h_att, ops.dropout(self.ffn(h_att), self.p)))
        h_cov = ops.silu(ops.conv1d_same(h_ffn, self.conv, self.conv_bias))
        logit = self.out(h_cov)
        alpha = ops.sigmoid(ops.reshape(logit, logit.shape[:-1]))
        return alpha, h_att, h_ffn, h_cov


class Decoder(Module):
    def __init__(self, init, cfg):
        self.embedding = init.normal("embedding", (cfg.vocab_size, cfg.d_model), 1.0)
        self.blocks = [DecoderBlock(init.sub(f"layer{i}"), cfg) for i in range(cfg.decoder_layers)]
        self.ln_out = LayerNorm(init, "ln_out", cfg.d_model, cfg.ln_eps)
        self.out = Linear(init, "out", cfg.d_model, cfg.vocab_size)
        self.d_model = cfg.d_model
        self.p = cfg.dropout

    def __call__(self, memory, ids):
        """Teacher-forced logits ``[len(ids), V]`` under a causal mask."""
        n = len(ids)
        x = ops.add(ops.take_rows(self.embedding, ids), sinusoidal_positions(n, self.d_model))
        x = ops.dropout(x, self.p)
        mask = ops.causal_mask(n)
        for block in self.blocks:
            x, _, _ = block(x, memory, mask)
        return self.out(self.ln_out(x))


class LCBNet(Module):
    def __init__(self, cfg, vocab, seed=0):
        cfg.validate()
        if cfg.vocab_size != len(vocab):
            raise DataError(f"model vocab_size {cfg.vocab_size} != vocabulary size {len(vocab)}")
        self.cfg = cfg
        self.vocab = vocab
        init = Init(np.random.default_rng(seed))
        self.audio_encoder = AudioEncoder(init.sub("audio_encoder"), cfg)
        self.context_encoder = ContextEncoder(init.sub("context_encoder"), cfg)
        self.ac_attention = CrossAttentionBlock(init.sub("ac_attention"), cfg)
        self.ca_attention = CrossAttentionBlock(init.sub("ca_attention"), cfg)
        self.biasing = BiasingPredictor(init.sub("biasing"), cfg)
        self.ctc_head = Linear(init.sub("ctc"), "proj", cfg.d_model, cfg.vocab_size)
        self.decoder = Decoder(init.sub("decoder"), cfg)

    # -- individual stages ---------------------------------------------------

    def encode_audio(self, features):
        return self.audio_encoder(features)

    def encode_context(self, ctx_ids):
        return self.context_encoder(list(ctx_ids))

    def cross_attention(self, query, memory, tag):
        block = {"ac": self.ac_attention, "ca": self.ca_attention}[tag]
        return block(query, memory)

    def biasing_prediction(self, h_ca):
        return self.biasing(h_ca)

    def decode_teacher_forced(self, h_ac, input_ids):
        return self.decoder(h_ac, list(input_ids))

    def decode_step(self, h_ac, prefix):
        """Next-token logits ``[1, V]`` after ``prefix`` (which starts with <sos>)."""
        prefix = list(prefix)
        if not prefix or prefix[0] != self.vocab.sos:
            raise ValueError("decoder prefix must start with <sos>")
        return ops.take_rows(self.decoder(h_ac, prefix), [len(prefix) - 1])

    # -- full passes -----------------------------------------------------------

    def forward(self, features, ctx_ids, decoder_input):
        h_a = self.encode_audio(features)
        h_c = self.encode_context(ctx_ids)
        h_ac, ac_w = self.ac_attention(h_a, h_c)
        h_ca, ca_w = self.ca_attention(h_c, h_a)
        alpha, h_att, h_ffn, h_cov = self.biasing(h_ca)
        return ForwardTrace(
            h_audio=h_a, h_context=h_c, h_ac=h_ac, h_ca=h_ca, h_att=h_att, h_ffn=h_ffn, h_cov=h_cov,
            alpha=alpha, ctc_logits=self.ctc_head(h_ac),
            decoder_logits=self.decoder(h_ac, list(decoder_input)),
            ac_attention=ac_w.data, ca_attention=ca_w.data,
        )

    def loss(self, features, reference_ids, ctx):
        """Weighted CTC + CE + BCE loss for one utterance.

        Returns ``(loss, trace, parts)``; ``parts`` holds the unweighted terms as
        floats plus ``ctc_feasible``.
        """
        ref = [int(i) for i in reference_ids]
        v = self.vocab
        trace = self.forward(features, ctx.ids, [v.sos] + ref)
        w = self.cfg.loss_weights
        ctc, feasible = ctc_loss(trace.ctc_logits, ref, v.ctc_blank)
        ce = ce_loss(trace.decoder_logits, ref + [v.eos], self.cfg.label_smoothing)
        bce = bce_loss(trace.alpha, ctx.bias_labels, ctx.separator_mask())
        total = ops.add(ops.mul(ce, w.ce), ops.mul(bce, w.bce))
        if feasible:
            total = ops.add(total, ops.mul(ctc, w.ctc))
        parts = {"ctc": _scalar(ctc.data), "ce": _scalar(ce.data), "bce": _scalar(bce.data),
                 "ctc_feasible": feasible}
        return total, trace, parts

    def greedy_decode(self, features, ctx_ids, max_len=50):
        """Argmax decoding from <sos> until <eos> or ``max_len`` tokens.

        The hypothesis is also capped at one token per encoder frame, the most
        a CTC alignment could hold, so a decoder stuck in a loop stops early.
        """
        v = self.vocab
        out = []
        if max_len <= 0:
            return from_ids(out, v)
        with no_grad():
            h_a = self.encode_audio(features)
            h_c = self.encode_context(ctx_ids)
            h_ac, _ = self.ac_attention(h_a, h_c)
            max_len = min(max_len, h_a.shape[-2])
            prefix = [v.sos]
            while len(out) < max_len:
                nxt = int(np.argmax(self.decode_step(h_ac, prefix).data[-1]))
                if nxt == v.eos:
                    break
                out.append(nxt)
                prefix.append(nxt)
        return from_ids(out, v)

    def ac_attention_matrix(self, features, ctx_ids):
        """AC cross-attention weights ``[heads, T, L]`` for one utterance."""
        with no_grad():
            h_a = self.encode_audio(features)
            h_c = self.encode_context(ctx_ids)
            _, weights = self.ac_attention(h_a, h_c)
        return weights.data


def _scalar(x):
    x = np.asarray(x)
    return float(x) if x.size == 1 else x


def export_attention(trace, path):
    """Write the AC attention weights ``[heads, T, L]`` as a matrix file."""
    weights = trace.ac_attention if isinstance(trace, ForwardTrace) else np.asarray(trace)
    write_matrix(path, weights)
