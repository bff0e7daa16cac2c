"""Pure numpy round kernel; same contract as the compiled ``_compiled`` module.

Arrays ``x``, ``y`` and ``xh`` are updated in place. ``out`` receives one row
per recorded round: mean f(xhat_i), f(zbar), consensus, surplus, G, then
f(xhat_i) per agent (all before subtracting f*).
"""
import numpy as np

from ..projection import _project_ball, _project_halfspace


def _value(pts, total_w, n_agents):
    # sum_i [w_i |x_1 - 1| + chain(x)] without looping over agents
    r = 1.0 + pts[..., 1:] - 2.0 * pts[..., :-1]
    return total_w * np.abs(pts[..., 0] - 1.0) + n_agents * (r * r).sum(axis=-1)


def _local(pts, lw):
    r = 1.0 + pts[:, 1:] - 2.0 * pts[:, :-1]
    return lw * np.abs(pts[:, 0] - 1.0) + (r * r).sum(axis=-1)


def _subgrad(x, lw):
    g = np.zeros_like(x)
    g[:, 0] = lw * np.sign(x[:, 0] - 1.0)
    r = 1.0 + x[:, 1:] - 2.0 * x[:, :-1]
    g[:, 1:] += 2.0 * r
    g[:, :-1] -= 4.0 * r
    return g


def _project(v, kind, lo, hi, center, radius, normal, offset):
    if kind == 0:
        return v
    if kind == 1:
        return np.clip(v, lo, hi)
    if kind == 2:
        return _project_ball(v, center, radius)
    return _project_halfspace(v, normal, offset)


def state_metrics(x, y, xh, lw, out):
    n_agents = x.shape[0]
    total_w = float(lw.sum())
    zbar = (x.sum(axis=0) + y.sum(axis=0)) / n_agents
    vals = _value(xh, total_w, n_agents)
    out[0] = vals.mean()
    out[1] = _value(zbar, total_w, n_agents)
    out[2] = np.sqrt(((x - zbar) ** 2).sum(axis=1)).max()
    out[3] = np.sqrt((y * y).sum(axis=1)).max()
    out[4] = np.nan
    out[5:5 + n_agents] = vals


def run_rounds(x, y, xh, alpha_sum, a_r, a_c, eps, lw, alphas, b1, b2, xi, record, out,
               kind, lo, hi, center, radius, normal, offset, use_sub, limit):
    rows = 0
    for c in range(len(record)):
        if record[c]:
            state_metrics(x, y, xh, lw, out[rows])
        alpha = alphas[c]
        if use_sub:
            g = _subgrad(x, lw)
        else:
            base = x + b1[c] * xi[:, c, 0]
            pert = base + b2[c] * xi[:, c, 1]
            diff = _local(pert, lw) - _local(base, lw)
            g = (diff / b2[c])[:, None] * xi[:, c, 1]
        mixed = a_r @ x
        x_new = _project(mixed + eps * y - alpha * g, kind, lo, hi, center, radius, normal, offset)
        y_new = x - mixed + a_c @ y - eps * y
        if not (np.all(np.abs(x_new) <= limit) and np.all(np.abs(y_new) <= limit)):
            return alpha_sum, rows, 1, c
        if record[c]:
            aug = x_new - mixed - eps * y
            out[rows, 4] = np.sqrt((aug * aug).sum(axis=1)).sum()
            rows += 1
        alpha_next = alphas[c + 1]
        alpha_sum += alpha_next
        w = alpha_next / alpha_sum if alpha_sum > 0 else 0.0
        xh += w * (x_new - xh)
        x[...] = x_new
        y[...] = y_new
    return alpha_sum, rows, 0, -1
