"""Categorical diffusion with uniform-noise transitions.

One step corrupts a state with ``Q_t = a_t I + (1 - a_t) 1 m^T`` where ``m`` is
uniform over the ``k`` classes. Steps are 1-based; ``alpha_bar(0) == 1``.

The functions taking one-hot vectors are the double-precision reference
implementation. ``reverse_probs`` / ``hybrid_terms`` are the batched torch
versions used by training and sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch

from .rng import categorical

STATIONARY_TOL = 1e-4
COSINE_OFFSET = 0.008
ALPHA_BAR_FLOOR = 1e-5


class KernelError(ValueError):
    pass


@dataclass(frozen=True)
class NoiseSchedule:
    t_max: int
    alpha: tuple[float, ...]
    alpha_bar: tuple[float, ...]
    kind: str = "custom"

    def __post_init__(self):
        if self.t_max < 1 or len(self.alpha) != self.t_max or len(self.alpha_bar) != self.t_max:
            raise KernelError("schedule arrays must have length t_max >= 1")
        if any(a < 0.0 or a > 1.0 for a in self.alpha):
            raise KernelError("alpha_t must lie in [0, 1]")
        prod = np.cumprod(self.alpha)
        if np.max(np.abs(prod - np.asarray(self.alpha_bar))) > 1e-12:
            raise KernelError("alpha_bar is not the running product of alpha")
        if self.alpha_bar[-1] > STATIONARY_TOL:
            raise KernelError(f"alpha_bar at t_max is {self.alpha_bar[-1]:.3g}; must be <= {STATIONARY_TOL}")

    @classmethod
    def from_alphas(cls, alphas, kind: str = "custom") -> "NoiseSchedule":
        alphas = tuple(float(a) for a in alphas)
        return cls(len(alphas), alphas, tuple(np.cumprod(alphas).tolist()), kind)

    def a(self, t: int) -> float:
        self._check(t)
        return self.alpha[t - 1]

    def abar(self, t: int) -> float:
        if t == 0:
            return 1.0
        self._check(t)
        return self.alpha_bar[t - 1]

    def _check(self, t: int):
        if not 1 <= t <= self.t_max:
            raise KernelError(f"step {t} outside [1, {self.t_max}]")

    def tables(self, dtype=torch.float64) -> tuple[torch.Tensor, torch.Tensor]:
        """(alpha, alpha_bar) indexed by step 0..T, with alpha[0] = alpha_bar[0] = 1."""
        a = torch.tensor((1.0,) + self.alpha, dtype=dtype)
        ab = torch.tensor((1.0,) + self.alpha_bar, dtype=dtype)
        return a, ab

    def to_dict(self) -> dict:
        return {"t_max": self.t_max, "kind": self.kind, "alpha": list(self.alpha)}

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseSchedule":
        return cls.from_alphas(d["alpha"], d.get("kind", "custom"))


def cosine_schedule(t_max: int, offset: float = COSINE_OFFSET) -> NoiseSchedule:
    if t_max < 1:
        raise KernelError("t_max must be >= 1")

    def f(t):
        return math.cos((t / t_max + offset) / (1 + offset) * math.pi / 2) ** 2

    abar = [min(max(f(t) / f(0), ALPHA_BAR_FLOOR), 1.0) for t in range(t_max + 1)]
    abar[0] = 1.0
    alphas = [abar[t] / abar[t - 1] for t in range(1, t_max + 1)]
    return NoiseSchedule.from_alphas(alphas, "cosine")


def linear_schedule(t_max: int) -> NoiseSchedule:
    if t_max < 1:
        raise KernelError("t_max must be >= 1")
    abar = [1.0] + [max(1.0 - t / t_max, ALPHA_BAR_FLOOR) for t in range(1, t_max + 1)]
    return NoiseSchedule.from_alphas([abar[t] / abar[t - 1] for t in range(1, t_max + 1)], "linear")


def make_schedule(kind: str, t_max: int) -> NoiseSchedule:
    if kind == "cosine":
        return cosine_schedule(t_max)
    if kind == "linear":
        return linear_schedule(t_max)
    raise KernelError(f"unknown schedule kind {kind!r}")


@dataclass(frozen=True)
class TransitionFamily:
    k: int
    schedule: NoiseSchedule

    def __post_init__(self):
        if self.k < 1:
            raise KernelError("state count must be positive")

    @property
    def m(self) -> np.ndarray:
        return np.full(self.k, 1.0 / self.k)


def _mix(f: TransitionFamily, a: float) -> np.ndarray:
    return a * np.eye(f.k) + (1.0 - a) * np.outer(np.ones(f.k), f.m)


def transition_matrix(f: TransitionFamily, t: int) -> np.ndarray:
    return _mix(f, f.schedule.a(t))


def accumulated_transition(f: TransitionFamily, s: int, t: int) -> np.ndarray:
    """Product ``Q_{s+1} ... Q_t`` in closed form."""
    if not 0 <= s < t <= f.schedule.t_max:
        raise KernelError(f"need 0 <= s < t <= T, got s={s}, t={t}")
    return _mix(f, f.schedule.abar(t) / f.schedule.abar(s))


def _qbar(f: TransitionFamily, t: int) -> np.ndarray:
    return np.eye(f.k) if t == 0 else accumulated_transition(f, 0, t)


def forward_marginal(f: TransitionFamily, x0: np.ndarray, t: int) -> np.ndarray:
    """q(x_t | x_0) for a one-hot ``x0``."""
    return _qbar(f, t).T @ np.asarray(x0, dtype=np.float64)


def posterior(f: TransitionFamily, xt: np.ndarray, x0: np.ndarray, t: int) -> np.ndarray:
    """q(x_{t-1} | x_t, x_0) for one-hot ``xt`` and ``x0``."""
    xt = np.asarray(xt, dtype=np.float64)
    x0 = np.asarray(x0, dtype=np.float64)
    num = (transition_matrix(f, t) @ xt) * (_qbar(f, t - 1).T @ x0)
    den = float(xt @ _qbar(f, t).T @ x0)
    if den <= 0.0:
        raise KernelError("posterior normaliser is zero: x_t unreachable from x_0")
    return num / den


def reverse_step_distribution(f: TransitionFamily, xt: np.ndarray, t: int, x0_probs: np.ndarray) -> np.ndarray:
    """p(x_{t-1} | x_t) as the posterior mixed over the predicted clean state."""
    x0_probs = np.asarray(x0_probs, dtype=np.float64)
    if abs(x0_probs.sum() - 1.0) > 1e-6 or np.any(x0_probs < 0):
        raise KernelError("x0_probs must be a probability vector")
    out = np.zeros(f.k)
    for c in range(f.k):
        if x0_probs[c] > 0:
            out += x0_probs[c] * posterior(f, xt, np.eye(f.k)[c], t)
    return out


def kl_term(q_dist: np.ndarray, p_dist: np.ndarray) -> float:
    q = np.asarray(q_dist, dtype=np.float64)
    p = np.asarray(p_dist, dtype=np.float64)
    support = q > 0
    if np.any(p[support] <= 0):
        raise KernelError("p has zero mass where q is positive")
    return max(float(np.sum(q[support] * np.log(q[support] / p[support]))), 0.0)


def cross_entropy_term(x0: np.ndarray, x0_probs: np.ndarray) -> float:
    """-log mass at the true class; ``inf`` when that mass is exactly zero."""
    mass = float(np.asarray(x0, dtype=np.float64) @ np.asarray(x0_probs, dtype=np.float64))
    return math.inf if mass <= 0.0 else -math.log(mass)


# batched torch versions ---------------------------------------------------------------------------------


def posterior_table(xt: torch.Tensor, a_t: torch.Tensor, abar_tm1: torch.Tensor, k: int) -> torch.Tensor:
    """q(x_{t-1} = v | x_t, x_0 = c) for every candidate clean class c.

    ``xt`` holds integer states (...,); ``a_t``/``abar_tm1`` broadcast to it.
    Returns (..., k_c, k_v).
    """
    a_t = a_t.unsqueeze(-1)
    onehot_t = torch.nn.functional.one_hot(xt, k).to(a_t.dtype)
    col = a_t * onehot_t + (1 - a_t) / k  # (Q_t x_t)[v]
    ab = abar_tm1.unsqueeze(-1).unsqueeze(-1)
    eye = torch.eye(k, dtype=a_t.dtype)
    rows = ab * eye + (1 - ab) / k  # [c, v] = (Qbar_{t-1}^T e_c)[v]
    un = col.unsqueeze(-2) * rows
    return un / un.sum(-1, keepdim=True)


def reverse_probs(x0_probs: torch.Tensor, xt: torch.Tensor, a_t: torch.Tensor, abar_tm1: torch.Tensor) -> torch.Tensor:
    k = x0_probs.shape[-1]
    table = posterior_table(xt, a_t, abar_tm1, k)
    return (x0_probs.unsqueeze(-1) * table).sum(-2)


def hybrid_terms(
    logits: torch.Tensor,
    x0: torch.Tensor,
    xt: torch.Tensor,
    a_t: torch.Tensor,
    abar_tm1: torch.Tensor,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Per-element KL(q(x_{t-1}|x_t,x_0) || p(x_{t-1}|x_t)) and -log p(x_0).

    All inputs are flat over supervised elements. At t = 1 the posterior is a
    delta at x_0, so the KL reduces to the reconstruction cross-entropy.
    """
    k = logits.shape[-1]
    log_probs = torch.log_softmax(logits, dim=-1)
    probs = log_probs.exp()
    table = posterior_table(xt, a_t, abar_tm1, k)
    q = table.gather(-2, x0.view(-1, 1, 1).expand(-1, 1, k)).squeeze(-2)
    p = (probs.unsqueeze(-1) * table).sum(-2)
    tiny = torch.finfo(p.dtype).tiny
    kl = torch.where(q > 0, q * (torch.log(q.clamp_min(tiny)) - torch.log(p.clamp_min(tiny))), torch.zeros_like(q)).sum(-1)
    ce = -log_probs.gather(-1, x0.view(-1, 1)).squeeze(-1)
    return kl, ce


def sample_forward(x0: np.ndarray, abar: float, k: int, u: np.ndarray) -> np.ndarray:
    """Draw x_t ~ q(x_t | x_0) by inverse CDF with pre-drawn uniforms ``u``."""
    probs = np.full(x0.shape + (k,), (1.0 - abar) / k)
    np.put_along_axis(probs, x0[..., None], abar + (1.0 - abar) / k, axis=-1)
    return categorical(probs, u)
