"""The four decentralized mirror algorithms over a shared agent state.

All methods run synchronous rounds over a fixed mixing matrix:

* ``dmgt``: dual mixing with gradient tracking and step clipping,
* ``dmd``:  primal mix-then-mirror with local gradient directions,
* ``dgt``:  primal mixing with gradient tracking,
* ``dda``:  constant-step dual averaging with tracking, i.e. the unclipped
  dual-mixing recursion run over a shifted kernel.

Steps are pure: they consume one :class:`AgentSystem` and return the next.
A run that leaves the attainable domain or produces non-finite state is
frozen with status ``diverged`` rather than raising, since baseline
nonconvergence is itself an experimental observable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import diagnostics
from .errors import (
    DomainViolation,
    NoConvergence,
    NotInImage,
    SingularHessian,
)

ALGORITHMS = ("dmgt", "dmd", "dgt", "dda")


@dataclass(frozen=True)
class AgentSystem:
    """Stacked per-agent state: rows of X are primal iterates, Z their dual
    images, Y the update directions (trackers for the GT methods)."""

    X: np.ndarray
    Z: np.ndarray
    Y: np.ndarray
    grads: np.ndarray  # per-agent local gradients at X, cached for GT
    t: int = 0
    clipped: bool = False


@dataclass(frozen=True)
class AlgoConfig:
    algorithm: str
    eta: float
    delta: float = math.inf        # clipping radius, finite only for dmgt
    max_iter: int = 100
    y0: str = "grad"               # 'grad' | 'zero'
    L: float = None                # relative smoothness override

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.eta <= 0 or self.delta <= 0:
            raise ValueError("eta and delta must be positive")
        if self.y0 not in ("grad", "zero"):
            raise ValueError("y0 must be 'grad' or 'zero'")


@dataclass
class RunResult:
    records: list
    system: AgentSystem
    status: str                 # 'done' | 'diverged'
    diverged_at: int = None
    reason: str = ""

    @property
    def diverged(self):
        return self.status == "diverged"


def clip(v, eta, delta):
    """v * min(eta, delta / |v|): an eta-scaling that caps the norm at delta.

    A zero (or underflowing) norm lands in the small-step branch, so the
    result is eta * v there.
    """
    v = np.asarray(v, dtype=float)
    nv = float(np.linalg.norm(v))
    if eta * nv <= delta:
        return eta * v
    return v * (delta / nv)


def clip_rows(V, eta, delta):
    """Row-wise clipping; also reports whether any row was actually clipped."""
    V = np.asarray(V, dtype=float)
    norms = np.linalg.norm(V, axis=1, keepdims=True)
    factors = np.where(norms > 0, np.minimum(eta, delta / np.where(norms > 0, norms, 1.0)), eta)
    return V * factors, bool(np.any(eta * norms > delta))


def init_system(prob, kernel, x0, cfg: AlgoConfig) -> AgentSystem:
    """Consensus initialization: identical rows, dual images, tracker per y0.

    ``y0='grad'`` seeds the trackers with the local gradients so the
    tracking identity holds from t = 0; ``y0='zero'`` reproduces the literal
    all-zeros initialization (whose tracking identity then carries a
    constant offset).
    """
    x0 = np.asarray(x0, dtype=float)
    kernel.domain.require_interior(x0, "initial point")
    X = np.tile(x0, (prob.m, 1))
    Z = np.tile(kernel.grad(x0), (prob.m, 1))
    grads = prob.grads_rowwise(X)
    if cfg.algorithm == "dmd" or cfg.y0 == "grad":
        Y = grads.copy()
    else:
        Y = np.zeros_like(X)
    return AgentSystem(X=X, Z=Z, Y=Y, grads=grads, t=0)


def _dual_mix_step(s: AgentSystem, prob, kernel, W, eta, delta, track=True):
    S, was_clipped = clip_rows(s.Y, eta, delta)
    Z1 = W @ (s.Z - S)
    X1 = kernel.grad_conj(Z1)
    kernel.domain.require_interior(X1, "updated primal iterate")
    G1 = prob.grads_rowwise(X1)
    Y1 = W @ s.Y + G1 - s.grads if track else G1
    return AgentSystem(X=X1, Z=Z1, Y=Y1, grads=G1, t=s.t + 1,
                       clipped=was_clipped)


def dmgt_step(s: AgentSystem, prob, kernel, W, cfg: AlgoConfig) -> AgentSystem:
    """Dual mixing with clipped tracker steps:
    Z+ = W (Z - clip(Y)); X+ = grad h*(Z+); Y+ = W Y + grad f(X+) - grad f(X)."""
    return _dual_mix_step(s, prob, kernel, W, cfg.eta, cfg.delta)


def dda_step(s: AgentSystem, prob, kernel, W, cfg: AlgoConfig) -> AgentSystem:
    """Constant-step dual averaging with tracking: the unclipped dual-mixing
    recursion.  The caller supplies the shifted kernel."""
    return _dual_mix_step(s, prob, kernel, W, cfg.eta, math.inf)


def dmd_step(s: AgentSystem, prob, kernel, W, cfg: AlgoConfig) -> AgentSystem:
    """Mix-then-mirror with local gradients:
    grad h(X+) = grad h(W X) - eta grad f(X)."""
    Xmix = W @ s.X
    kernel.domain.require_interior(Xmix, "mixed primal iterate")
    Z1 = kernel.grad(Xmix) - cfg.eta * s.grads
    X1 = kernel.grad_conj(Z1)
    kernel.domain.require_interior(X1, "updated primal iterate")
    G1 = prob.grads_rowwise(X1)
    return AgentSystem(X=X1, Z=Z1, Y=G1, grads=G1, t=s.t + 1)


def dgt_step(s: AgentSystem, prob, kernel, W, cfg: AlgoConfig) -> AgentSystem:
    """Mix-then-mirror with gradient tracking:
    Z+ = grad h(W X) - eta Y; Y+ = W Y + grad f(X+) - grad f(X)."""
    Xmix = W @ s.X
    kernel.domain.require_interior(Xmix, "mixed primal iterate")
    Z1 = kernel.grad(Xmix) - cfg.eta * s.Y
    X1 = kernel.grad_conj(Z1)
    kernel.domain.require_interior(X1, "updated primal iterate")
    G1 = prob.grads_rowwise(X1)
    Y1 = W @ s.Y + G1 - s.grads
    return AgentSystem(X=X1, Z=Z1, Y=Y1, grads=G1, t=s.t + 1)


_STEPS = {"dmgt": dmgt_step, "dmd": dmd_step, "dgt": dgt_step, "dda": dda_step}

_DIVERGENCE_ERRORS = (DomainViolation, NotInImage, NoConvergence, SingularHessian)


def _finite(s: AgentSystem) -> bool:
    return bool(np.all(np.isfinite(s.X)) and np.all(np.isfinite(s.Z))
                and np.all(np.isfinite(s.Y)) and np.all(np.isfinite(s.grads)))


def run(prob, kernel, mixing, cfg: AlgoConfig, x0, L=None, run_id="run",
        record_every=1, recorder=None, hooks=()) -> RunResult:
    """Execute ``cfg.max_iter`` synchronous rounds of the chosen step rule.

    ``record_every=1`` emits a full diagnostics record per iteration (plus
    the initial state); ``record_every=0`` records only the initial and
    final states, which is what grid tuning needs.  Hooks are called as
    ``hook(t, prev_system, next_system)`` after every accepted step.
    Divergence (domain exit, failed inversion, non-finite state) freezes the
    run with status ``diverged``.  Everything is deterministic given the
    inputs; no randomness is consumed here.
    """
    W = mixing.W
    rho = mixing.rho
    step = _STEPS[cfg.algorithm]
    if recorder is None:
        L_eff = L if L is not None else (cfg.L if cfg.L is not None else 1.0)
        recorder = diagnostics.Recorder(
            prob, kernel, rho, L_eff, cfg.eta, cfg.delta,
            run_id=run_id, algorithm=cfg.algorithm)
    system = init_system(prob, kernel, x0, cfg)
    record_state = recorder.observe(system, clipped=False, status="running")
    status, diverged_at, reason = "done", None, ""
    emit_all = record_every == 1
    for t in range(cfg.max_iter):
        try:
            new_system = step(system, prob, kernel, W, cfg)
        except _DIVERGENCE_ERRORS as exc:
            status, diverged_at, reason = "diverged", t, f"{type(exc).__name__}: {exc}"
            break
        if not _finite(new_system):
            status, diverged_at = "diverged", t + 1
            reason = "non-finite iterate"
            system = new_system
            break
        for hook in hooks:
            hook(t, system, new_system)
        system = new_system
        if emit_all:
            record_state = recorder.observe(system, clipped=system.clipped,
                                            status="running")
            if not (math.isfinite(record_state.f_bar)
                    and math.isfinite(record_state.stationarity)):
                status, diverged_at, reason = "diverged", system.t, "non-finite metric"
                break
    if status == "done" and not emit_all and system.t > 0:
        record_state = recorder.observe(system, clipped=system.clipped,
                                        status="running")
        if not (math.isfinite(record_state.f_bar)
                and math.isfinite(record_state.stationarity)):
            status, diverged_at, reason = "diverged", system.t, "non-finite metric"
    if status == "diverged" and not emit_all and _finite(system):
        try:
            recorder.observe(system, clipped=system.clipped, status="running")
        except _DIVERGENCE_ERRORS:
            pass
    recorder.mark_final(status)
    return RunResult(records=recorder.records, system=system, status=status,
                     diverged_at=diverged_at, reason=reason)


def compliant_parameters(kernel, L, rho, m, delta_cap=1e9):
    """Step size and clipping radius satisfying the convergence hypotheses.

    delta is the largest radius with zeta(2 delta) <= (1 - rho)/2 (found by
    bisection on the monotone modulus, capped at ``delta_cap``); eta is
    (1 - rho)^2 / (25 L lambda^2) with lambda = 1 + zeta(sqrt(20 m) delta /
    (1 - rho)).
    """
    target = (1.0 - rho) / 2.0
    delta = 0.5 * kernel.modulus.largest_delta(target, cap=2.0 * delta_cap)
    lam = diagnostics.lambda_of(kernel, m, rho, delta)
    if not math.isfinite(lam):
        raise ValueError("lambda diverged; reduce delta_cap")
    eta = (1.0 - rho) ** 2 / (25.0 * L * lam * lam)
    return eta, delta, lam
