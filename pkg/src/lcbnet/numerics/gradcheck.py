"""Central finite-difference verification of ``backward``."""
from dataclasses import dataclass, field

import numpy as np

from .array import backward, no_grad


@dataclass
class ParamCheck:
    name: str
    n_entries: int
    max_rel_error: float
    worst_index: tuple
    n_failed: int


@dataclass
class GradCheckReport:
    tol: float
    entries: list = field(default_factory=list)

    @property
    def passed(self):
        return all(e.n_failed == 0 for e in self.entries)

    @property
    def max_rel_error(self):
        return max((e.max_rel_error for e in self.entries), default=0.0)

    def failures(self):
        return [e for e in self.entries if e.n_failed]

    def __str__(self):
        lines = [f"{e.name:<48s} n={e.n_entries:<6d} max_rel={e.max_rel_error:.2e} failed={e.n_failed}"
                 for e in self.entries]
        lines.append(f"overall max_rel={self.max_rel_error:.2e} tol={self.tol:g} "
                     f"{'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def relative_error(analytic, numeric, floor):
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


def grad_check(build_loss, params, h=1e-5, tol=1e-3, floor=1e-6, batch=256):
    """Compare ``backward`` gradients against central differences, entry by entry.

    ``build_loss()`` must rebuild the loss from the current parameter values.
    Parameters with ``requires_grad`` false are skipped. The relative error of
    an entry is ``|a - n| / max(|a|, |n|, floor)``; the floor keeps entries whose
    true gradient is at rounding level from dominating the report.

    With ``batch > 1`` the perturbed copies of a parameter are stacked on a new
    leading axis and evaluated in one forward pass, so ``build_loss`` must be
    written with broadcasting-safe ops (all of ``numerics.ops`` are).
    """
    params = [p for p in params if p.requires_grad]
    for p in params:
        p.zero_grad()
    loss = build_loss()
    backward(loss)
    analytic = {id(p): (np.zeros_like(p.data) if p.grad is None else p.grad.copy()) for p in params}
    for p in params:
        p.zero_grad()

    report = GradCheckReport(tol=tol)
    with no_grad():
        for p in params:
            numeric = _numeric_grad(build_loss, p, h, batch)
            err = relative_error(analytic[id(p)], numeric, floor)
            worst = np.unravel_index(int(np.argmax(err)), err.shape) if err.size else ()
            report.entries.append(ParamCheck(
                name=getattr(p, "name", f"param{len(report.entries)}"),
                n_entries=int(err.size),
                max_rel_error=float(err.max()) if err.size else 0.0,
                worst_index=tuple(int(i) for i in worst),
                n_failed=int((err > tol).sum()),
            ))
    return report


def _numeric_grad(build_loss, p, h, batch):
    base = p.data
    flat = base.reshape(-1)
    out = np.empty(flat.size)
    try:
        if batch <= 1:
            for i in range(flat.size):
                out[i] = _probe(build_loss, p, base, i, h)
            return out.reshape(base.shape)
        pad = (1,) * getattr(p, "batch_pad", 0)
        for start in range(0, flat.size, batch):
            idx = np.arange(start, min(start + batch, flat.size))
            n = idx.size
            stack = np.repeat(flat[None, :], 2 * n, axis=0)
            stack[np.arange(n), idx] += h
            stack[n + np.arange(n), idx] -= h
            p.data = stack.reshape((2 * n,) + pad + base.shape)
            values = np.asarray(build_loss().data, dtype=np.float64).reshape(-1)
            if values.shape != (2 * n,):
                raise ValueError(f"loss did not broadcast over the perturbation axis for {p!r}: "
                                 f"got shape {values.shape}")
            out[idx] = (values[:n] - values[n:]) / (2.0 * h)
    finally:
        p.data = base
    return out.reshape(base.shape)


def _probe(build_loss, p, base, i, h):
    flat = base.reshape(-1).copy()
    flat[i] = base.reshape(-1)[i] + h
    p.data = flat.reshape(base.shape)
    f_plus = float(build_loss().data)
    flat[i] = base.reshape(-1)[i] - h
    p.data = flat.reshape(base.shape)
    f_minus = float(build_loss().data)
    return (f_plus - f_minus) / (2.0 * h)
