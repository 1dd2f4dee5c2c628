"""Building blocks: parameter containers, attention, feed-forward, encoder/decoder layers."""
import numpy as np

from ..numerics import Parameter, ops


class Init:
    """Creates named parameters from one seeded generator."""

    def __init__(self, rng, prefix=""):
        self.rng = rng
        self.prefix = prefix

    def sub(self, name):
        return Init(self.rng, f"{self.prefix}{name}.")

    def matrix(self, name, fan_in, fan_out, shape=None, batch_pad=None):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        shape = (fan_in, fan_out) if shape is None else shape
        return Parameter(self.prefix + name, self.rng.uniform(-limit, limit, shape), batch_pad)

    def normal(self, name, shape, std):
        return Parameter(self.prefix + name, self.rng.normal(0.0, std, shape))

    def zeros(self, name, shape):
        return Parameter(self.prefix + name, np.zeros(shape))

    def ones(self, name, shape):
        return Parameter(self.prefix + name, np.ones(shape))


class Module:
    def parameters(self):
        """All parameters in definition order."""
        out = []
        for value in vars(self).values():
            if isinstance(value, Parameter):
                out.append(value)
            elif isinstance(value, Module):
                out.extend(value.parameters())
            elif isinstance(value, (list, tuple)):
                for item in value:
                    if isinstance(item, Module):
                        out.extend(item.parameters())
        return out

    def named_parameters(self):
        return {p.name: p for p in self.parameters()}


class Linear(Module):
    def __init__(self, init, name, d_in, d_out, bias=True):
        self.weight = init.matrix(f"{name}.weight", d_in, d_out)
        self.bias = init.zeros(f"{name}.bias", d_out) if bias else None

    def __call__(self, x):
        return ops.linear(x, self.weight, self.bias)


class LayerNorm(Module):
    def __init__(self, init, name, d, eps=1e-5):
        self.gain = init.ones(f"{name}.gain", d)
        self.bias = init.zeros(f"{name}.bias", d)
        self.eps = eps

    def __call__(self, x):
        return ops.layer_norm(x, self.gain, self.bias, self.eps)


class MultiHeadAttention(Module):
    """Scaled dot-product attention over ``n_heads`` heads.

    Returns the projected output and the weights ``[..., heads, T_q, T_kv]``.
    """

    def __init__(self, init, d_model, n_heads):
        self.n_heads = n_heads
        self.scale = 1.0 / np.sqrt(d_model // n_heads)
        self.w_q = Linear(init, "w_q", d_model, d_model)
        self.w_k = Linear(init, "w_k", d_model, d_model)
        self.w_v = Linear(init, "w_v", d_model, d_model)
        self.w_o = Linear(init, "w_o", d_model, d_model)

    def __call__(self, query, memory, mask=None):
        if query.shape[-1] != memory.shape[-1]:
            raise ValueError(f"attention width mismatch: query {query.shape}, memory {memory.shape}")
        q = ops.split_heads(self.w_q(query), self.n_heads)
        k = ops.split_heads(self.w_k(memory), self.n_heads)
        v = ops.split_heads(self.w_v(memory), self.n_heads)
        scores = ops.mul(ops.matmul(q, ops.swapaxes(k, -1, -2)), self.scale)
        if mask is not None:
            scores = ops.add(scores, mask)
        weights = ops.softmax_rows(scores)
        out = ops.merge_heads(ops.matmul(weights, v))
        return self.w_o(out), weights


class FeedForward(Module):
    def __init__(self, init, d_model, d_ffn):
        self.w_1 = Linear(init, "w_1", d_model, d_ffn)
        self.w_2 = Linear(init, "w_2", d_ffn, d_model)

    def __call__(self, x):
        return self.w_2(ops.silu(self.w_1(x)))


class ConvModule(Module):
    """Pointwise, depthwise (length preserving), swish, pointwise."""

    def __init__(self, init, d_model, kernel):
        self.pw_1 = Linear(init, "pw_1", d_model, d_model)
        self.depthwise = init.matrix("depthwise.kernel", kernel, kernel, shape=(kernel, d_model), batch_pad=1)
        self.depthwise_bias = init.zeros("depthwise.bias", d_model)
        self.pw_2 = Linear(init, "pw_2", d_model, d_model)

    def __call__(self, x):
        h = ops.depthwise_conv1d_same(self.pw_1(x), self.depthwise, self.depthwise_bias)
        return self.pw_2(ops.silu(h))


class EncoderBlock(Module):
    """Pre-norm block: self-attention, optional convolution module, feed-forward."""

    def __init__(self, init, cfg, conv=False):
        eps = cfg.ln_eps
        self.ln_att = LayerNorm(init, "ln_att", cfg.d_model, eps)
        self.attn = MultiHeadAttention(init.sub("attn"), cfg.d_model, cfg.n_heads)
        self.conv = None
        if conv:
            self.ln_conv = LayerNorm(init, "ln_conv", cfg.d_model, eps)
            self.conv = ConvModule(init.sub("conv"), cfg.d_model, cfg.conformer_kernel)
        self.ln_ffn = LayerNorm(init, "ln_ffn", cfg.d_model, eps)
        self.ffn = FeedForward(init.sub("ffn"), cfg.d_model, cfg.d_ffn)
        self.p = cfg.dropout

    def __call__(self, x, mask=None):
        h = self.ln_att(x)
        a, weights = self.attn(h, h, mask)
        x = ops.add(x, ops.dropout(a, self.p))
        if self.conv is not None:
            x = ops.add(x, ops.dropout(self.conv(self.ln_conv(x)), self.p))
        x = ops.add(x, ops.dropout(self.ffn(self.ln_ffn(x)), self.p))
        return x, weights


class CrossAttentionBlock(Module):
    """Post-norm cross-attention: attend, add and normalise, feed-forward, add and normalise."""

    def __init__(self, init, cfg):
        self.attn = MultiHeadAttention(init.sub("attn"), cfg.d_model, cfg.n_heads)
        self.ln_1 = LayerNorm(init, "ln_1", cfg.d_model, cfg.ln_eps)
        self.ffn = FeedForward(init.sub("ffn"), cfg.d_model, cfg.d_ffn)
        self.ln_2 = LayerNorm(init, "ln_2", cfg.d_model, cfg.ln_eps)
        self.p = cfg.dropout

    def __call__(self, query, memory):
        a, weights = self.attn(query, memory)
        x = self.ln_1(ops.add(query, ops.dropout(a, self.p)))
        return self.ln_2(ops.add(x, ops.dropout(self.ffn(x), self.p))), weights


class DecoderBlock(Module):
    def __init__(self, init, cfg):
        eps = cfg.ln_eps
        self.ln_self = LayerNorm(init, "ln_self", cfg.d_model, eps)
        self.self_attn = MultiHeadAttention(init.sub("self_attn"), cfg.d_model, cfg.n_heads)
        self.ln_src = LayerNorm(init, "ln_src", cfg.d_model, eps)
        self.src_attn = MultiHeadAttention(init.sub("src_attn"), cfg.d_model, cfg.n_heads)
        self.ln_ffn = LayerNorm(init, "ln_ffn", cfg.d_model, eps)
        self.ffn = FeedForward(init.sub("ffn"), cfg.d_model, cfg.d_ffn)
        self.p = cfg.dropout

    def __call__(self, x, memory, mask):
        h = self.ln_self(x)
        a, self_w = self.self_attn(h, h, mask)
        x = ops.add(x, ops.dropout(a, self.p))
        a, src_w = self.src_attn(self.ln_src(x), memory)
        x = ops.add(x, ops.dropout(a, self.p))
        x = ops.add(x, ops.dropout(self.ffn(self.ln_ffn(x)), self.p))
        return x, self_w, src_w


def sinusoidal_positions(n, d):
    pos = np.arange(n)[:, None]
    rate = np.exp(-np.log(10000.0) * (np.arange(0, d, 2) / d))
    table = np.zeros((n, d))
    table[:, 0::2] = np.sin(pos * rate)
    table[:, 1::2] = np.cos(pos * rate)[:, : d // 2]
    return table
