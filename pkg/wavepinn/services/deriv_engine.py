"""
Derivative engine for the FFM network.

Input derivatives: every layer propagates, per input coordinate k, the triple
(h, dh/dz_k, d2h/dz_k^2). Only the diagonal second derivatives are carried because the
wave operator needs u_tt and the Laplacian, never mixed terms.

Parameter gradients: reverse accumulation through that same augmented forward pass, so a
loss built from values, gradients and diagonal second derivatives is differentiated
exactly. Losses are expressed as weighted mean squares of residuals that are linear in the
bundle channels around the current point (see LinearizedResidual).
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence

import numpy as np

from wavepinn.errors import NumericError, ShapeError
from wavepinn.services.fourier_net import (
    FfmNetwork,
    gelu_third_derivative,
    gelu_with_derivatives,
)
from wavepinn.settings import get_settings
from wavepinn.utils.parallel import chunk_slices, map_ordered, tree_sum

logger = logging.getLogger(__name__)


@dataclass
class DerivativeBundle:
    """u, grad u (x_1..x_d, t) and diag of the Hessian, at N points."""

    value: np.ndarray                    # (N,)
    grad: Optional[np.ndarray] = None    # (N, D)
    diag2: Optional[np.ndarray] = None   # (N, D)

    def __len__(self) -> int:
        return len(self.value)


@dataclass
class LinearizedResidual:
    """
    Residual values r and their partial derivatives with respect to the bundle channels.
    Channels a residual does not touch are None.
    """

    values: np.ndarray
    d_value: Optional[np.ndarray] = None   # (N,)
    d_grad: Optional[np.ndarray] = None    # (N, D)
    d_diag2: Optional[np.ndarray] = None   # (N, D)


@dataclass(frozen=True)
class ResidualTerm:
    """One mean-squared loss component: weight * mean(r^2) over `inputs`."""

    name: str
    inputs: np.ndarray
    order: int
    residual: Callable[[DerivativeBundle, slice], LinearizedResidual]
    weight: float = 1.0


class GradientResult(NamedTuple):
    components: Dict[str, float]   # unweighted mean squares per term
    grad: Optional[np.ndarray]     # ParamGradient, aligned with net.params


def _add(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return a + b


def _dense(t: np.ndarray, M: np.ndarray) -> np.ndarray:
    """t (..., w) @ M (w, o) as a single 2-D product."""
    return (t.reshape(-1, t.shape[-1]) @ M).reshape(*t.shape[:-1], M.shape[-1])


def _contract(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """a (N, K, O), b (N, K, I) -> (O, I) summed over points and input channels."""
    return a.reshape(-1, a.shape[-1]).T @ b.reshape(-1, b.shape[-1])


def _check_inputs(net: FfmNetwork, z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.ndim == 1:
        z = z[None, :]
    if z.ndim != 2 or z.shape[1] != net.input_dim:
        raise ShapeError(f"network expects inputs of length {net.input_dim}, got shape {z.shape}")
    return z


# ==================== Forward ====================

def _forward_subnet(net: FfmNetwork, index: int, z: np.ndarray, order: int):
    p = net.subnet(index)
    a = net.scales[index]
    G = a * p["W1"].T  # (D, width): d(pre-activation)/dz_k
    pre = (a * z) @ p["W1"].T
    d1 = d2 = None

    if net.is_fourier:
        c, s = np.cos(pre), np.sin(pre)
        h = np.concatenate([c, s], axis=1)
        if order >= 1:
            d1 = np.concatenate([-s[:, None, :] * G, c[:, None, :] * G], axis=2)
        if order >= 2:
            G2 = G * G
            d2 = np.concatenate([-c[:, None, :] * G2, -s[:, None, :] * G2], axis=2)
        first = {"P": pre, "c": c, "s": s, "G": G}
    else:
        pre = pre + p["b1"]
        s0, s1, s2 = gelu_with_derivatives(pre)
        h = s0
        if order >= 1:
            d1 = s1[:, None, :] * G
        if order >= 2:
            d2 = s2[:, None, :] * (G * G)
        first = {"P": pre, "G": G, "s1": s1, "s2": s2}

    layers = []
    for layer in range(2, net.depth + 1):
        W, b = p[f"W{layer}"], p[f"b{layer}"]
        prev = (h, d1, d2)
        P = h @ W.T + b
        dP = _dense(d1, W.T) if d1 is not None else None
        ddP = _dense(d2, W.T) if d2 is not None else None
        s0, s1, s2 = gelu_with_derivatives(P)
        h = s0
        if dP is not None:
            d1 = s1[:, None, :] * dP
        if ddP is not None:
            d2 = s2[:, None, :] * dP * dP + s1[:, None, :] * ddP
        layers.append({"prev": prev, "P": P, "dP": dP, "ddP": ddP, "W": W, "s1": s1, "s2": s2})

    w, b = p["w_out"], p["b_out"]
    y = h @ w + b
    dy = _dense(d1, w[:, None])[..., 0] if d1 is not None else None
    ddy = _dense(d2, w[:, None])[..., 0] if d2 is not None else None
    tape = {"z": z, "first": first, "layers": layers, "last": (h, d1, d2)}
    return y, dy, ddy, tape


def _forward(net: FfmNetwork, z: np.ndarray, order: int):
    Q = net.config.subnet_count
    value = grad = diag2 = None
    tapes = []
    for index in range(Q):
        y, dy, ddy, tape = _forward_subnet(net, index, z, order)
        value = _add(value, y)
        grad = _add(grad, dy)
        diag2 = _add(diag2, ddy)
        tapes.append(tape)
    bundle = DerivativeBundle(
        value=value / Q,
        grad=grad / Q if grad is not None else None,
        diag2=diag2 / Q if diag2 is not None else None,
    )
    return bundle, tapes


def value_grad_laplacian(net: FfmNetwork, z: np.ndarray, order: int = 2) -> DerivativeBundle:
    """Value, input gradient and diagonal second derivatives at network inputs z."""
    if order not in (0, 1, 2):
        raise ShapeError(f"derivative order must be 0, 1 or 2, got {order}")
    bundle, _ = _forward(net, _check_inputs(net, z), order)
    return bundle


# ==================== Reverse accumulation ====================

def _backward_subnet(net: FfmNetwork, index: int, tape, ybar, dybar, ddybar) -> Dict[str, np.ndarray]:
    p = net.subnet(index)
    a = net.scales[index]
    grads: Dict[str, np.ndarray] = {}

    h, d1, d2 = tape["last"]
    w = p["w_out"]
    g_w = h.T @ ybar
    if dybar is not None:
        g_w = g_w + _contract(d1, dybar[:, :, None])[:, 0]
    if ddybar is not None:
        g_w = g_w + _contract(d2, ddybar[:, :, None])[:, 0]
    grads["w_out"] = g_w
    grads["b_out"] = np.asarray(ybar.sum())

    Hb = ybar[:, None] * w
    D1b = dybar[:, :, None] * w if dybar is not None else None
    D2b = ddybar[:, :, None] * w if ddybar is not None else None

    for layer, rec in zip(range(net.depth, 1, -1), reversed(tape["layers"])):
        P, dP, ddP, W = rec["P"], rec["dP"], rec["ddP"], rec["W"]
        h_prev, d1_prev, d2_prev = rec["prev"]
        s1, s2 = rec["s1"], rec["s2"]
        Pb = Hb * s1
        dPb = ddPb = None
        if D1b is not None:
            Pb = Pb + (D1b * dP).sum(axis=1) * s2
            dPb = D1b * s1[:, None, :]
        if D2b is not None:
            s3 = gelu_third_derivative(P)
            Pb = Pb + (D2b * dP * dP).sum(axis=1) * s3 + (D2b * ddP).sum(axis=1) * s2
            dPb = _add(dPb, 2.0 * D2b * s2[:, None, :] * dP)
            ddPb = D2b * s1[:, None, :]

        g_W = Pb.T @ h_prev
        if dPb is not None:
            g_W = g_W + _contract(dPb, d1_prev)
        if ddPb is not None:
            g_W = g_W + _contract(ddPb, d2_prev)
        grads[f"W{layer}"] = g_W
        grads[f"b{layer}"] = Pb.sum(axis=0)

        Hb = Pb @ W
        D1b = _dense(dPb, W) if dPb is not None else None
        D2b = _dense(ddPb, W) if ddPb is not None else None

    z = tape["z"]
    first = tape["first"]
    G = first["G"]
    if net.is_fourier:
        c, s = first["c"], first["s"]
        m = c.shape[1]
        Pb = -s * Hb[:, :m] + c * Hb[:, m:]
        Gb = np.zeros_like(G)
        if D1b is not None:
            D1c, D1s = D1b[:, :, :m], D1b[:, :, m:]
            Pb = Pb - (D1c * G).sum(axis=1) * c - (D1s * G).sum(axis=1) * s
            Gb = Gb + np.einsum("nkm,nm->km", D1c, -s) + np.einsum("nkm,nm->km", D1s, c)
        if D2b is not None:
            D2c, D2s = D2b[:, :, :m], D2b[:, :, m:]
            G2 = G * G
            Pb = Pb + (D2c * G2).sum(axis=1) * s - (D2s * G2).sum(axis=1) * c
            Gb = Gb - 2.0 * G * (np.einsum("nkm,nm->km", D2c, c) + np.einsum("nkm,nm->km", D2s, s))
    else:
        P = first["P"]
        s1, s2 = first["s1"], first["s2"]
        Pb = Hb * s1
        dPb = None
        if D1b is not None:
            Pb = Pb + (D1b * G).sum(axis=1) * s2
            dPb = D1b * s1[:, None, :]
        if D2b is not None:
            s3 = gelu_third_derivative(P)
            Pb = Pb + (D2b * G * G).sum(axis=1) * s3
            dPb = _add(dPb, 2.0 * D2b * s2[:, None, :] * G)
        Gb = dPb.sum(axis=0) if dPb is not None else np.zeros_like(G)
        grads["b1"] = Pb.sum(axis=0)

    # pre = a z W1^T and G = a W1^T
    grads["W1"] = a * (Pb.T @ z) + a * Gb.T
    return grads


def _backward(net: FfmNetwork, tapes, value_bar, grad_bar, diag2_bar) -> np.ndarray:
    Q = net.config.subnet_count
    flat = np.zeros_like(net.params)
    ybar = value_bar / Q
    dybar = grad_bar / Q if grad_bar is not None else None
    ddybar = diag2_bar / Q if diag2_bar is not None else None
    for index, tape in enumerate(tapes):
        grads = _backward_subnet(net, index, tape, ybar, dybar, ddybar)
        views = net.subnet(index, flat)
        for name, g in grads.items():
            views[name][...] = g
    return flat


# ==================== Loss terms ====================

def _run_chunk(net: FfmNetwork, term: ResidualTerm, n_total: int, sl: slice, with_gradient: bool):
    z = term.inputs[sl]
    bundle, tapes = _forward(net, z, term.order)
    res = term.residual(bundle, sl)
    r = np.asarray(res.values, dtype=float)
    if not np.all(np.isfinite(r)):
        raise NumericError(term.name, "non-finite residual")
    sq = float(np.dot(r, r))
    if not with_gradient:
        return sq, None

    rbar = (2.0 * term.weight / n_total) * r
    value_bar = rbar * res.d_value if res.d_value is not None else np.zeros_like(r)
    grad_bar = rbar[:, None] * res.d_grad if res.d_grad is not None else None
    diag2_bar = rbar[:, None] * res.d_diag2 if res.d_diag2 is not None else None
    grad = _backward(net, tapes, value_bar, grad_bar, diag2_bar)
    if not np.all(np.isfinite(grad)):
        raise NumericError(term.name, "non-finite parameter gradient")
    return sq, grad


def evaluate_terms(
    net: FfmNetwork,
    terms: Sequence[ResidualTerm],
    with_gradient: bool = True,
    workers: Optional[int] = None,
    chunk_size: Optional[int] = None,
) -> GradientResult:
    """
    Mean-squared residual per term and, optionally, the parameter gradient of
    sum_j weight_j * mean(r_j^2). Chunks fan out over worker threads; chunk results are
    combined by a fixed tree so repeated calls are bit-identical.
    """
    settings = get_settings()
    workers = workers or settings.workers
    chunk_size = chunk_size or settings.chunk_size

    components: Dict[str, float] = {}
    term_grads: List[np.ndarray] = []
    for term in terms:
        inputs = _check_inputs(net, term.inputs)
        term = ResidualTerm(term.name, inputs, term.order, term.residual, term.weight)
        n = len(inputs)
        if n == 0:
            components[term.name] = 0.0
            continue
        slices = chunk_slices(n, chunk_size)
        results = map_ordered(lambda sl: _run_chunk(net, term, n, sl, with_gradient), slices, workers)
        components[term.name] = tree_sum([sq for sq, _ in results]) / n
        if with_gradient:
            term_grads.append(tree_sum([g for _, g in results]))

    grad = None
    if with_gradient:
        grad = tree_sum(term_grads) if term_grads else np.zeros_like(net.params)
    return GradientResult(components=components, grad=grad)


def param_gradient(net: FfmNetwork, terms: Sequence[ResidualTerm], **kwargs) -> GradientResult:
    """ParamGradient of the weighted mean-squared loss defined by `terms`."""
    return evaluate_terms(net, terms, with_gradient=True, **kwargs)
