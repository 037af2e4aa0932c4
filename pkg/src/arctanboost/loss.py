"""Pinball loss and its smooth approximations.

Every loss is written in terms of the residual ``u = y - y_hat``. The
derivative helpers, however, return derivatives with respect to the
*prediction* ``y_hat``, because that is what the booster consumes when it
computes leaf weights. With ``d/dy_hat = -d/du`` the gradient flips sign and
the Hessian does not.

Four kinds are supported:

``pinball``
    The exact quantile loss. Legal for evaluation only, its Hessian is zero.
``exponential``
    ``tau*u + s*log(1 + exp(-u/s))``; Hessian decays exponentially in ``|u|``.
``huber``
    Huber norm weighted by ``tau`` / ``1 - tau``; Hessian vanishes for ``|u| > delta``.
``arctan``
    ``(tau - 0.5 + arctan(u/s)/pi)*u + s/pi``; Hessian decays polynomially.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

KINDS = ("pinball", "exponential", "huber", "arctan")
SMOOTH_KINDS = ("exponential", "huber", "arctan")

DEFAULT_S = 0.05
DEFAULT_DELTA = 1.0
DEFAULT_LEVELS = (0.05, 0.15, 0.25, 0.35, 0.45, 0.55, 0.65, 0.75, 0.85, 0.95)


class LossError(ValueError):
    """Raised for invalid loss inputs or parameters."""


class QuantileLevels(tuple):
    """Strictly increasing, non-empty tuple of levels in (0, 1)."""

    def __new__(cls, levels: Sequence[float] = DEFAULT_LEVELS):
        vals = tuple(float(t) for t in levels)
        if not vals:
            raise LossError("quantile levels must be non-empty")
        for t in vals:
            if not (0.0 < t < 1.0):
                raise LossError(f"quantile level {t!r} outside (0, 1)")
        for a, b in zip(vals, vals[1:]):
            if not a < b:
                raise LossError(f"quantile levels not strictly increasing at {a!r}, {b!r}")
        return super().__new__(cls, vals)

    @classmethod
    def parse(cls, text: str) -> "QuantileLevels":
        """Parse a comma separated list such as ``"0.05,0.5,0.95"``."""
        try:
            return cls(float(p) for p in text.split(",") if p.strip())
        except ValueError as exc:
            raise LossError(f"cannot parse quantile levels {text!r}: {exc}") from None

    def position(self, tau: float) -> int:
        for j, t in enumerate(self):
            if abs(t - tau) <= 1e-12:
                return j
        raise LossError(f"level {tau!r} not among {list(self)}")

    def labels(self) -> list[str]:
        return [f"q{t:g}" for t in self]


@dataclass(frozen=True)
class LossSpec:
    kind: str = "arctan"
    s: float = DEFAULT_S
    delta: float = DEFAULT_DELTA

    def __post_init__(self):
        if self.kind not in KINDS:
            raise LossError(f"unknown loss kind {self.kind!r}; expected one of {KINDS}")
        if self.kind in ("exponential", "arctan") and not (self.s > 0 and np.isfinite(self.s)):
            raise LossError(f"smoothing parameter s must be positive, got {self.s!r}")
        if self.kind == "huber" and not (self.delta > 0 and np.isfinite(self.delta)):
            raise LossError(f"huber delta must be positive, got {self.delta!r}")

    @property
    def trainable(self) -> bool:
        return self.kind in SMOOTH_KINDS

    def to_dict(self) -> dict:
        return {"kind": self.kind, "s": self.s, "delta": self.delta}


class GradHess(NamedTuple):
    grad: float
    hess: float


def _check_tau(tau):
    t = np.asarray(tau, dtype=float)
    if not np.all((t > 0) & (t < 1)):
        raise LossError(f"tau must lie in (0, 1), got {tau!r}")


def _check_u(u):
    if not np.all(np.isfinite(u)):
        raise LossError("residual must be finite")


def _check_s(s):
    if not (s > 0 and np.isfinite(s)):
        raise LossError(f"smoothing parameter s must be positive, got {s!r}")


def _check_delta(delta):
    if not (delta > 0 and np.isfinite(delta)):
        raise LossError(f"huber delta must be positive, got {delta!r}")


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


# --- raw kernels, no validation; broadcast over arrays -----------------------


def _pinball(u, tau):
    return np.where(u >= 0, tau * u, (tau - 1.0) * u)


def _pinball_gh(u, tau):
    # Subgradient at u == 0 is taken from the u < 0 side.
    dldu = np.where(u > 0, tau, tau - 1.0)
    return -dldu, np.zeros_like(dldu)


def _arctan(u, tau, s):
    return (tau - 0.5 + np.arctan(u / s) / np.pi) * u + s / np.pi


def _arctan_gh(u, tau, s):
    z = u / s
    w = 1.0 + z * z
    dldu = tau - 0.5 + np.arctan(z) / np.pi + z / (np.pi * w)
    hess = 2.0 / (np.pi * s) / (w * w)
    return -dldu, hess


def _softplus(x):
    # log(1 + exp(x)) without overflow
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def _sigmoid(x):
    ex = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + ex), ex / (1.0 + ex))


def _exponential(u, tau, s):
    return tau * u + s * _softplus(-u / s)


def _exponential_gh(u, tau, s):
    z = u / s
    dldu = tau - _sigmoid(-z)
    # (exp(-z/2) + exp(z/2))^-2 / s rewritten as sigmoid(z)*sigmoid(-z)/s
    hess = _sigmoid(z) * _sigmoid(-z) / s
    return -dldu, hess


def _huber_norm(u, delta):
    a = np.abs(u)
    return np.where(a <= delta, 0.5 * u * u, a - 0.5 * delta)


def _huber(u, tau, delta):
    n = _huber_norm(u, delta)
    return np.where(u > 0, tau * n, np.where(u < 0, (1.0 - tau) * n, 0.0))


def _huber_gh(u, tau, delta):
    weight = np.where(u > 0, tau, 1.0 - tau)
    a = np.abs(u)
    dldu = weight * np.where(a <= delta, u, np.sign(u))
    hess = np.where(a < delta, weight, 0.0)
    # one-sided averages at the kinks
    hess = np.where(a == delta, 0.5 * weight, hess)
    hess = np.where(u == 0, 0.5, hess)
    return -dldu, hess


# --- public scalar API --------------------------------------------------------


def pinball(u, tau):
    """Exact pinball loss ``tau*u`` for ``u >= 0`` and ``(tau-1)*u`` otherwise."""
    _check_u(u)
    _check_tau(tau)
    return _scalar(_pinball(np.asarray(u, dtype=float), tau))


def pinball_grad_hess(u, tau) -> GradHess:
    """Subgradient w.r.t. the prediction; at ``u == 0`` this is ``1 - tau``."""
    _check_u(u)
    _check_tau(tau)
    g, h = _pinball_gh(np.asarray(u, dtype=float), tau)
    return GradHess(_scalar(g), _scalar(h))


def arctan_loss(u, tau, s=DEFAULT_S):
    _check_u(u)
    _check_tau(tau)
    _check_s(s)
    return _scalar(_arctan(np.asarray(u, dtype=float), tau, s))


def arctan_grad_hess(u, tau, s=DEFAULT_S) -> GradHess:
    """Gradient and Hessian of the arctan pinball loss w.r.t. the prediction.

    The Hessian is ``2/(pi*s) * (1 + (u/s)**2)**-2``: strictly positive and
    maximal at ``u == 0``.
    """
    _check_u(u)
    _check_tau(tau)
    _check_s(s)
    g, h = _arctan_gh(np.asarray(u, dtype=float), tau, s)
    return GradHess(_scalar(g), _scalar(h))


def exponential_loss_grad_hess(u, tau, s=DEFAULT_S) -> tuple[float, GradHess]:
    """Loss, gradient and Hessian of the exponential (softplus) pinball loss.

    The loss uses the stable form ``s*softplus(-u/s)`` so that very negative
    residuals do not overflow.
    """
    _check_u(u)
    _check_tau(tau)
    _check_s(s)
    u = np.asarray(u, dtype=float)
    g, h = _exponential_gh(u, tau, s)
    return _scalar(_exponential(u, tau, s)), GradHess(_scalar(g), _scalar(h))


def huber_pinball_grad_hess(u, tau, delta=DEFAULT_DELTA) -> tuple[float, GradHess]:
    """Loss, gradient and Hessian of the Huber pinball loss.

    Hessian is ``tau`` on ``(0, delta)``, ``1 - tau`` on ``(-delta, 0)`` and
    zero beyond ``delta``. At the kinks it is the mean of the one-sided values.
    """
    _check_u(u)
    _check_tau(tau)
    _check_delta(delta)
    u = np.asarray(u, dtype=float)
    g, h = _huber_gh(u, tau, delta)
    return _scalar(_huber(u, tau, delta)), GradHess(_scalar(g), _scalar(h))


# --- dispatch on LossSpec -----------------------------------------------------


def loss_value(u, tau, spec: LossSpec):
    """Elementwise loss for any kind, broadcasting ``u`` against ``tau``."""
    u = np.asarray(u, dtype=float)
    _check_u(u)
    _check_tau(tau)
    if spec.kind == "pinball":
        return _pinball(u, tau)
    if spec.kind == "arctan":
        return _arctan(u, tau, spec.s)
    if spec.kind == "exponential":
        return _exponential(u, tau, spec.s)
    return _huber(u, tau, spec.delta)


def _grad_hess(u, tau, spec: LossSpec):
    if spec.kind == "pinball":
        return _pinball_gh(u, tau)
    if spec.kind == "arctan":
        return _arctan_gh(u, tau, spec.s)
    if spec.kind == "exponential":
        return _exponential_gh(u, tau, spec.s)
    return _huber_gh(u, tau, spec.delta)


def batch_grad_hess(residuals, levels: Sequence[float], spec: LossSpec):
    """Gradients and Hessians for an ``N x N_tau`` residual matrix.

    Column ``j`` is evaluated at ``levels[j]``. Returns two float arrays with
    the shape of ``residuals``.
    """
    r = np.asarray(residuals, dtype=float)
    if r.ndim != 2:
        raise LossError(f"residuals must be 2-D, got shape {r.shape}")
    tau = np.asarray(levels, dtype=float)
    if r.shape[1] != tau.size:
        raise LossError(f"residuals have {r.shape[1]} columns but {tau.size} levels given")
    _check_tau(tau)
    bad = ~np.isfinite(r)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise LossError(f"non-finite residual at row {i}, column {j}")
    grad, hess = _grad_hess(r, tau[None, :], spec)
    return np.ascontiguousarray(grad), np.ascontiguousarray(hess)
