"""Forward numerics of the geometry/articulation fusion and the training objectives.

Nothing here is trained; weights are inputs. Losses reduce with ``math.fsum`` so
their value does not depend on summation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

DEFAULT_LAMBDAS = (1.0, 0.5)
PROB_FLOOR = 1e-7
ADAPTIVE_ATOL = 1e-6
MIN_STEP = 1e-9


@dataclass(frozen=True, eq=False)
class AttentionWeights:
    W_Q: np.ndarray  # C_art x d
    W_K: np.ndarray  # C_geo x d
    W_V: np.ndarray  # C_geo x d
    W_O: np.ndarray  # d x C_art

    def __post_init__(self):
        d = self.W_Q.shape[1]
        if not (self.W_K.shape[1] == self.W_V.shape[1] == self.W_O.shape[0] == d):
            raise ValueError("inconsistent head width across attention weights")
        if self.W_K.shape[0] != self.W_V.shape[0]:
            raise ValueError("W_K and W_V must share the geometric channel count")

    @property
    def d(self) -> int:
        return self.W_Q.shape[1]

    @classmethod
    def random(cls, c_art: int, c_geo: int, d: int, rng) -> AttentionWeights:
        s = 1.0 / np.sqrt(d)
        return cls(rng.normal(size=(c_art, d)) * s, rng.normal(size=(c_geo, d)) * s,
                   rng.normal(size=(c_geo, d)) * s, rng.normal(size=(d, c_art)) * s)


def softmax(logits, axis: int = -1) -> np.ndarray:
    z = np.asarray(logits, dtype=float)
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def partwise_attention(V_art, V_geo, part_ids, w: AttentionWeights) -> np.ndarray:
    """Articulation rows attend to geometry rows of the same part only, plus a residual."""
    V_art = np.asarray(V_art, dtype=float)
    V_geo = np.asarray(V_geo, dtype=float)
    part_ids = np.asarray(part_ids)
    if V_art.ndim != 2 or V_geo.ndim != 2 or len(V_art) != len(V_geo) or len(part_ids) != len(V_art):
        raise ValueError("V_art, V_geo and part_ids must share the row count")
    if V_art.shape[1] != w.W_Q.shape[0] or V_geo.shape[1] != w.W_K.shape[0] or w.W_O.shape[1] != V_art.shape[1]:
        raise ValueError("feature widths do not match the attention weights")
    Q = V_art @ w.W_Q
    K = V_geo @ w.W_K
    V = V_geo @ w.W_V
    mixed = np.zeros_like(Q)
    scale = 1.0 / np.sqrt(w.d)
    for part in np.unique(part_ids):
        rows = np.nonzero(part_ids == part)[0]
        attn = softmax(Q[rows] @ K[rows].T * scale, axis=1)
        mixed[rows] = attn @ V[rows]
    return mixed @ w.W_O + V_art


def fuse_concat(V_geo, F_art) -> np.ndarray:
    V_geo = np.asarray(V_geo, dtype=float)
    F_art = np.asarray(F_art, dtype=float)
    if len(V_geo) != len(F_art):
        raise ValueError(f"row counts differ: {len(V_geo)} vs {len(F_art)}")
    return np.concatenate([V_geo, F_art], axis=1)


def _finite(*arrays) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise ValueError("non-finite input")


@dataclass(frozen=True)
class VAELoss:
    total: float
    geo: float
    art: float
    kl: float


def vae_loss(occ_pred, occ_true, art_pred, art_true, mu, sigma,
             lambda1: float = DEFAULT_LAMBDAS[0], lambda2: float = DEFAULT_LAMBDAS[1],
             movable=None) -> VAELoss:
    """Occupancy BCE + weighted articulation MSE + weighted KL to a unit Gaussian.

    ``movable`` masks the rows entering the articulation term (default: all rows).
    Each log argument is floored at 1e-7, so a term whose coefficient is zero
    contributes exactly zero.
    """
    p = np.asarray(occ_pred, dtype=float).ravel()
    y = np.asarray(occ_true, dtype=float).ravel()
    a_hat = np.asarray(art_pred, dtype=float)
    a = np.asarray(art_true, dtype=float)
    mu = np.asarray(mu, dtype=float).ravel()
    sigma = np.asarray(sigma, dtype=float).ravel()
    _finite(p, y, a_hat, a, mu, sigma)
    if p.shape != y.shape or a_hat.shape != a.shape or mu.shape != sigma.shape:
        raise ValueError("shape mismatch")
    if np.any(sigma <= 0):
        raise ValueError("sigma must be positive")

    bce = -(y * np.log(np.maximum(p, PROB_FLOOR)) + (1 - y) * np.log(np.maximum(1 - p, PROB_FLOOR)))
    geo = math.fsum(bce) / len(bce) if len(bce) else 0.0

    rows = a.reshape(len(a), -1)
    rows_hat = a_hat.reshape(len(a_hat), -1)
    if movable is not None:
        keep = np.asarray(movable, dtype=bool)
        rows, rows_hat = rows[keep], rows_hat[keep]
    sq = (rows_hat - rows).ravel() ** 2
    art = math.fsum(sq) / len(sq) if len(sq) else 0.0

    var = sigma ** 2
    kl_terms = 0.5 * (mu ** 2 + var - np.log(var) - 1.0)
    kl = math.fsum(kl_terms) / len(kl_terms) if len(kl_terms) else 0.0
    total = geo + lambda1 * art + lambda2 * kl
    return VAELoss(total, geo, art, kl)


def flow_interpolate(z0, z1, t: float) -> np.ndarray:
    """Straight path ``(1 - t) z0 + t z1``; the endpoints return the inputs."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t={t} outside [0, 1]")
    z0 = np.asarray(z0, dtype=float)
    z1 = np.asarray(z1, dtype=float)
    if z0.shape != z1.shape:
        raise ValueError("shape mismatch")
    if t == 0.0:
        return z0.copy()
    if t == 1.0:
        return z1.copy()
    return (1.0 - t) * z0 + t * z1


def flow_matching_loss(v_pred, z0, z1) -> float:
    v_pred = np.asarray(v_pred, dtype=float)
    z0 = np.asarray(z0, dtype=float)
    z1 = np.asarray(z1, dtype=float)
    if not (v_pred.shape == z0.shape == z1.shape):
        raise ValueError("shape mismatch")
    sq = (v_pred - (z1 - z0)).ravel() ** 2
    return math.fsum(sq) / len(sq)


Field = Callable[[np.ndarray, float], np.ndarray]


def _eval(field: Field, z, t) -> np.ndarray:
    v = np.asarray(field(z, t), dtype=float)
    if not np.all(np.isfinite(v)):
        raise FloatingPointError(f"velocity field returned non-finite values at t={t}")
    return v


def _heun_step(field: Field, z, t, h):
    k1 = _eval(field, z, t)
    k2 = _eval(field, z + h * k1, t + h)
    return z + 0.5 * h * (k1 + k2)


def integrate_flow(field: Field, z0, steps: int = 50, method: str = "heun") -> np.ndarray:
    """Integrate dz/dt = field(z, t) from t = 0 to t = 1.

    ``heun-adaptive`` starts from ``1/steps`` and uses step doubling: a step is
    accepted when one full step and two half steps agree to 1e-6 per component.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    z = np.asarray(z0, dtype=float).copy()
    if method == "euler":
        h = 1.0 / steps
        for i in range(steps):
            z = z + h * _eval(field, z, i * h)
        return z
    if method == "heun":
        h = 1.0 / steps
        for i in range(steps):
            z = _heun_step(field, z, i * h, h)
        return z
    if method != "heun-adaptive":
        raise ValueError(f"unknown method {method!r}")
    t, h = 0.0, 1.0 / steps
    while 1.0 - t > 1e-12:
        h = min(h, 1.0 - t)
        if h < MIN_STEP:
            raise FloatingPointError(f"adaptive step underflow at t={t}")
        full = _heun_step(field, z, t, h)
        half = _heun_step(field, _heun_step(field, z, t, h / 2), t + h / 2, h / 2)
        err = float(np.max(np.abs(full - half))) if z.size else 0.0
        if err <= ADAPTIVE_ATOL:
            # local extrapolation of the second-order pair
            z = half + (half - full) / 3.0
            t = t + h if t + h < 1.0 else 1.0
            if err < ADAPTIVE_ATOL / 8:
                h *= 2.0
        else:
            h *= 0.5
    return z
