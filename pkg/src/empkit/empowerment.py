"""Efficient empowerment: maximize the Gaussian-channel mutual-information
objective over a per-state Gaussian action distribution.

The objective is a reparameterized Monte Carlo average of closed-form KL
divergences between the conditional next-state Gaussian (per sampled
action) and the marginal next-state Gaussian obtained by moment
propagation with the action slots carrying the policy's mean and variance.
Common random numbers (one fixed eps draw per restart) make the objective
deterministic and smooth, so first-order ascent with analytic gradients
applies; the gradients are verified against central finite differences in
the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .gaussian import DiagonalGaussian
from .nets import (
    DynamicsModel,
    _moments_backprop,
    _moments_trace,
    _point_backprop,
    _point_trace,
    forward_point,
)

__all__ = [
    "LOG_STD_MIN",
    "LOG_STD_MAX",
    "GaussianPolicy",
    "EmpowermentEstimate",
    "OptimizerOptions",
    "marginal_transition",
    "mi_lower_bound",
    "mi_lower_bound_with_gradient",
    "maximize_empowerment",
    "select_action",
    "empowerment_landscape",
]

LOG_STD_MIN = -6.0
LOG_STD_MAX = 2.0

# An optimizer iterate is only accepted when the mean squared mismatch
# between sampled conditional means and the propagated marginal mean stays
# within this factor of the marginal variance; 3 leaves room for Monte
# Carlo fluctuation while rejecting the saturated regime where the
# mismatch exceeds the propagated variance by orders of magnitude.
_CONSISTENCY_FACTOR = 3.0


@dataclass(frozen=True)
class GaussianPolicy:
    """Per-state action distribution N(action_mean, exp(action_log_std)^2)."""

    action_mean: np.ndarray
    action_log_std: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.action_mean, dtype=float))
        log_std = np.atleast_1d(np.asarray(self.action_log_std, dtype=float))
        if mean.shape != log_std.shape or mean.ndim != 1:
            raise ValueError("mean and log_std must be vectors of equal length")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(log_std))):
            raise ValueError("policy parameters must be finite")
        log_std = np.clip(log_std, LOG_STD_MIN, LOG_STD_MAX)
        mean.setflags(write=False)
        log_std.setflags(write=False)
        object.__setattr__(self, "action_mean", mean)
        object.__setattr__(self, "action_log_std", log_std)

    @property
    def dim(self) -> int:
        return self.action_mean.size


@dataclass(frozen=True)
class OptimizerOptions:
    step_size: float = 0.05
    max_iter: int = 200
    grad_tol: float = 1e-4
    restarts: int = 4
    mc_samples: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.step_size <= 0 or self.grad_tol <= 0:
            raise ValueError("step_size and grad_tol must be positive")
        if self.max_iter < 1 or self.restarts < 1 or self.mc_samples < 1:
            raise ValueError("max_iter, restarts and mc_samples must be >= 1")


@dataclass(frozen=True)
class EmpowermentEstimate:
    value: float
    policy: GaussianPolicy
    iterations: int
    converged: bool
    mc_samples: int
    seed: int


def marginal_transition(
    model: DynamicsModel, state, policy: GaussianPolicy
) -> DiagonalGaussian:
    """p(x'|x) with the action marginalized out by moment propagation.

    The network input Gaussian has zero variance on the state slots and
    the policy's mean/variance on the action slots.  The output halves
    (mean, log-std) are combined into a next-state Gaussian whose variance
    is the propagated mean spread plus the intrinsic model noise
    exp(2 * propagated log-std mean).
    """
    state = np.atleast_1d(np.asarray(state, dtype=float))
    if state.size != model.state_dim or policy.dim != model.action_dim:
        raise ValueError("state/policy dimensions do not match model")
    m0 = np.concatenate([state, policy.action_mean])
    v0 = np.concatenate(
        [np.zeros(model.state_dim), np.exp(2.0 * policy.action_log_std)]
    )
    m, v, _ = _moments_trace(model.net, m0, v0)
    d = model.state_dim
    return DiagonalGaussian(m[:d], v[:d] + np.exp(2.0 * m[d:]))


def _mi_core(model, state, mean, log_std, eps, want_grad):
    """Objective (and optionally its gradient) at fixed eps draws."""
    d = model.state_dim
    m0 = np.concatenate([state, mean])
    v0 = np.concatenate([np.zeros(d), np.exp(2.0 * log_std)])
    mM, vM, trace_m = _moments_trace(model.net, m0, v0)
    noise = np.exp(2.0 * mM[d:])
    mq = mM[:d]
    vq = vM[:d] + noise

    sigma = np.exp(log_std)
    actions = mean + sigma * eps  # (N, k)
    n = eps.shape[0]
    X = np.concatenate([np.broadcast_to(state, (n, d)), actions], axis=1)
    Y, trace_p = _point_trace(model.net, X)
    mp = Y[:, :d]
    vp = np.exp(2.0 * Y[:, d:])

    dm = mp - mq
    kl = 0.5 * (np.log(vq) - np.log(vp)) + (vp + dm**2) / (2.0 * vq) - 0.5
    value = float(kl.sum() / n)
    # self-consistency of the surrogate: the marginal variance produced by
    # moment propagation should account for the spread of the sampled
    # conditional means; when it does not (saturated action means), the KL
    # terms inflate spuriously and the value is not trustworthy
    consistent = bool(np.all((dm**2).mean(axis=0) <= _CONSISTENCY_FACTOR * vq))
    if not want_grad:
        return value, None, None, consistent

    # conditional path: d KL / d (mp, vp) -> network input -> action samples
    gmp = dm / vq / n
    gvp = (0.5 / vq - 0.5 / vp) / n
    gY = np.concatenate([gmp, gvp * 2.0 * vp], axis=1)
    gX = _point_backprop(trace_p, gY)
    ga = gX[:, d:]
    gmean = ga.sum(axis=0)
    glog = (ga * (sigma * eps)).sum(axis=0)

    # marginal path: d KL / d (mq, vq) -> moment-net input -> policy params
    gmq = (-dm / vq).sum(axis=0) / n
    gvq = (0.5 / vq - (vp + dm**2) / (2.0 * vq**2)).sum(axis=0) / n
    g_mM = np.zeros_like(mM)
    g_vM = np.zeros_like(vM)
    g_mM[:d] = gmq
    g_vM[:d] = gvq
    g_mM[d:] = gvq * 2.0 * noise
    g_m0, g_v0 = _moments_backprop(trace_m, g_mM, g_vM)
    gmean = gmean + g_m0[d:]
    glog = glog + g_v0[d:] * 2.0 * np.exp(2.0 * log_std)
    return value, gmean, glog, consistent


def _draw_eps(seed: int, mc_samples: int, action_dim: int) -> np.ndarray:
    return np.random.default_rng(seed).standard_normal((mc_samples, action_dim))


def mi_lower_bound(
    model: DynamicsModel,
    state,
    policy: GaussianPolicy,
    mc_samples: int,
    seed: int,
) -> float:
    """Monte Carlo mutual-information objective, deterministic per seed."""
    if mc_samples < 1:
        raise ValueError("mc_samples must be >= 1")
    state = np.atleast_1d(np.asarray(state, dtype=float))
    eps = _draw_eps(seed, mc_samples, model.action_dim)
    value, _, _, _ = _mi_core(
        model, state, policy.action_mean, policy.action_log_std, eps, False
    )
    return value


def mi_lower_bound_with_gradient(
    model: DynamicsModel,
    state,
    policy: GaussianPolicy,
    mc_samples: int,
    seed: int,
):
    """Objective plus analytic gradient wrt (action_mean, action_log_std)."""
    state = np.atleast_1d(np.asarray(state, dtype=float))
    eps = _draw_eps(seed, mc_samples, model.action_dim)
    value, gmean, glog, _ = _mi_core(
        model, state, policy.action_mean, policy.action_log_std, eps, True
    )
    return value, gmean, glog


def maximize_empowerment(
    model: DynamicsModel, state, opts: OptimizerOptions
) -> EmpowermentEstimate:
    """Ascend the MI objective with deterministic Adam; best result over restarts.

    Adam rather than a fixed-step ascent because the objective's gradient
    magnitude varies over orders of magnitude across states; the
    normalized step covers the clamped log-std range within the iteration
    budget everywhere.  Restart r uses seed ``opts.seed + r`` for its
    (fixed) eps draw.
    Convergence is declared when the projected gradient (log-std
    components pushing against an active clamp are zeroed) drops below
    ``grad_tol`` in infinity norm.
    """
    state = np.atleast_1d(np.asarray(state, dtype=float))
    if state.size != model.state_dim:
        raise ValueError("state dimension does not match model")
    k = model.action_dim

    best = None
    failures = 0
    beta1, beta2, adam_eps = 0.9, 0.999, 1e-8
    for r in range(opts.restarts):
        rng = np.random.default_rng(opts.seed + r)
        eps = rng.standard_normal((opts.mc_samples, k))
        # restart 0 starts at the canonical initial policy; later restarts
        # perturb the initial mean to reach other basins of the objective.
        # The perturbation is kept small: for saturating dynamics the
        # surrogate (delta-method marginal) is only trustworthy near the
        # activations' linear range, and far-out means can inflate the
        # objective spuriously (the propagated marginal variance collapses
        # while the sampled conditional means still spread).
        mean = 0.5 * rng.standard_normal(k) if r > 0 else np.zeros(k)
        log_std = -np.ones(k)
        m1 = np.zeros(2 * k)
        m2 = np.zeros(2 * k)
        best_r = None
        converged = False
        iters = 0
        try:
            for iters in range(1, opts.max_iter + 1):
                value, gmean, glog, ok = _mi_core(
                    model, state, mean, log_std, eps, True
                )
                if not np.isfinite(value):
                    raise FloatingPointError("non-finite objective")
                if ok and (best_r is None or value > best_r[0]):
                    best_r = (value, mean.copy(), log_std.copy())
                glog_p = np.where(
                    ((log_std <= LOG_STD_MIN) & (glog < 0))
                    | ((log_std >= LOG_STD_MAX) & (glog > 0)),
                    0.0,
                    glog,
                )
                gnorm = max(
                    np.max(np.abs(gmean), initial=0.0),
                    np.max(np.abs(glog_p), initial=0.0),
                )
                if gnorm < opts.grad_tol:
                    converged = True
                    break
                g = np.concatenate([gmean, glog_p])
                m1 = beta1 * m1 + (1.0 - beta1) * g
                m2 = beta2 * m2 + (1.0 - beta2) * g**2
                step = (
                    opts.step_size
                    * (m1 / (1.0 - beta1**iters))
                    / (np.sqrt(m2 / (1.0 - beta2**iters)) + adam_eps)
                )
                mean = mean + step[:k]
                log_std = np.clip(
                    log_std + step[k:], LOG_STD_MIN, LOG_STD_MAX
                )
            else:
                iters = opts.max_iter
            # evaluate the final iterate too (the loop scores pre-step points)
            value, _, _, ok = _mi_core(model, state, mean, log_std, eps, False)
            if (
                ok
                and np.isfinite(value)
                and (best_r is None or value > best_r[0])
            ):
                best_r = (value, mean.copy(), log_std.copy())
        except FloatingPointError:
            failures += 1
            continue
        if best_r is None:
            failures += 1
            continue
        if best is None or best_r[0] > best[0]:
            best = (best_r[0], best_r[1], best_r[2], iters, converged)

    if best is None:
        raise RuntimeError(f"all {failures} restarts diverged")
    value, mean, log_std, iters, converged = best
    return EmpowermentEstimate(
        value=max(value, 0.0),
        policy=GaussianPolicy(mean, log_std),
        iterations=iters,
        converged=converged,
        mc_samples=opts.mc_samples,
        seed=opts.seed,
    )


def select_action(model: DynamicsModel, state, candidates, opts: OptimizerOptions):
    """One-step greedy action choice.

    Predicts the next-state mean for each candidate action and returns the
    candidate whose predicted state has the highest empowerment, together
    with that value.  Ties break toward the lowest candidate index.
    """
    cands = [np.atleast_1d(np.asarray(a, dtype=float)) for a in candidates]
    if not cands:
        raise ValueError("candidates must be non-empty")
    state = np.atleast_1d(np.asarray(state, dtype=float))
    d = model.state_dim
    best_a = None
    best_v = -np.inf
    for a in cands:
        y = forward_point(model.net, np.concatenate([state, a]))
        est = maximize_empowerment(model, y[:d], opts)
        if est.value > best_v:
            best_a, best_v = a, est.value
    return best_a, best_v


def empowerment_landscape(model: DynamicsModel, state_grid, opts: OptimizerOptions):
    """Empowerment per grid state, with per-state seeds ``opts.seed + index``.

    Per-state optimizer failures yield a None entry instead of aborting
    the whole sweep.  Output order matches input order.
    """
    results = []
    for i, s in enumerate(state_grid):
        per_state = replace(opts, seed=opts.seed + i)
        try:
            est = maximize_empowerment(model, s, per_state)
        except RuntimeError:
            est = None
        results.append((np.atleast_1d(np.asarray(s, dtype=float)), est))
    return results
