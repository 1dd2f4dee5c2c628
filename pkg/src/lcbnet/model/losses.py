"""CTC, label-smoothed cross entropy and masked binary cross entropy."""
import numpy as np

from .. import kernels
from ..numerics import DiffArray, grad_enabled, make_node, ops

# stands in for +inf when no CTC alignment exists
CTC_INFEASIBLE = 1e30
BCE_CLAMP = 1e-12


def ctc_loss(logits, labels, blank):
    """Negative log-likelihood of ``labels`` under CTC, from unnormalised logits ``[..., T, V]``.

    Returns ``(loss, feasible)``. When ``T`` is shorter than the shortest
    alignment the loss is the ``CTC_INFEASIBLE`` sentinel with no gradient and
    ``feasible`` is False; callers drop such terms from their average.
    """
    labels = [int(x) for x in labels]
    T, V = logits.shape[-2:]
    if kernels.ctc_min_frames(labels) > T:
        return DiffArray(np.full(logits.shape[:-2], CTC_INFEASIBLE)), False
    log_probs = ops.log_softmax(logits)
    ext = kernels.extend_with_blanks(labels, blank)
    lead = log_probs.shape[:-2]
    flat = log_probs.data.reshape(-1, T, V)
    want_grad = grad_enabled() and log_probs.requires_grad
    nll = np.empty(flat.shape[0])
    grads = np.zeros_like(flat) if want_grad else None
    for b in range(flat.shape[0]):
        la, lb, ll = kernels.ctc_forward_backward(flat[b], ext)
        nll[b] = -ll
        if want_grad:
            gamma = np.exp(la + lb - ll)  # state posteriors, [T, S]
            np.add.at(grads[b].T, ext, -gamma.T)
    out = nll.reshape(lead)
    if not want_grad:
        return DiffArray(out), True
    grads = grads.reshape(log_probs.shape)
    return make_node(out, (log_probs,), lambda g: (np.asarray(g)[..., None, None] * grads,)), True


def ce_loss(logits, targets, smoothing=0.0):
    """Mean token cross entropy against ``(1 - eps) * one_hot + eps / V``."""
    targets = np.asarray(targets, dtype=np.int64)
    if logits.shape[-2] != targets.shape[0]:
        raise ValueError(f"{logits.shape[-2]} decoder positions but {targets.shape[0]} targets")
    log_probs = ops.log_softmax(logits)
    nll = ops.mul(ops.pick(log_probs, targets), -1.0)
    if smoothing:
        uniform = ops.mul(ops.mean(log_probs, axis=-1), -1.0)
        nll = ops.add(ops.mul(nll, 1.0 - smoothing), ops.mul(uniform, smoothing))
    return ops.mean(nll, axis=-1)


def bce_loss(alpha, labels, separator_mask):
    """Binary cross entropy averaged over non-separator positions."""
    labels = np.asarray(labels, dtype=np.float64)
    keep = ~np.asarray(separator_mask, dtype=bool)
    if alpha.shape[-1] != labels.shape[0] or labels.shape != keep.shape:
        raise ValueError(f"shape mismatch: alpha {alpha.shape}, labels {labels.shape}, mask {keep.shape}")
    n = int(keep.sum())
    if n == 0:
        return DiffArray(np.zeros(alpha.shape[:-1]))
    a = ops.clip(alpha, BCE_CLAMP, 1.0 - BCE_CLAMP)
    pos = ops.mul(ops.log(a), labels * keep)
    neg = ops.mul(ops.log(ops.sub(1.0, a)), (1.0 - labels) * keep)
    return ops.mul(ops.sum(ops.add(pos, neg), axis=-1), -1.0 / n)
