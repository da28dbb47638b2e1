"""Numeric certification of relative Hessian regularity.

The certifier is a falsification test: it samples pairs at bounded
dual-space distance, measures the worst relative Hessian gap, and compares
it with the kernel's analytic modulus.  A clean report means "consistent
with" the modulus over the sampled region; it is not a proof.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import NotInImage, SamplingExhausted
from .kernels import Kernel

CERT_TOL = 1e-9


def relative_hessian_gap(kernel: Kernel, x, y) -> float:
    """Spectral norm of H(x) H(y)^{-1} - I for the kernel Hessian H.

    Diagonal Hessians reduce to max_i |d_x[i]/d_y[i] - 1|; otherwise the
    small dense product is formed and its largest singular value taken.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dx = kernel.hess_diag(x)
    if dx is not None:
        dy = kernel.hess_diag(y)
        return float(np.max(np.abs(dx / dy - 1.0)))
    Hx = kernel.hess_matrix(x)
    Hy = kernel.hess_matrix(y)
    M = np.linalg.solve(Hy.T, Hx.T).T - np.eye(kernel.dim)
    return float(np.linalg.norm(M, 2))


@dataclass
class HrucReport:
    """Per-delta worst observed gap against the analytic modulus."""

    kernel_id: str
    delta_grid: list
    worst_gap: list
    analytic_zeta: list
    n_samples: int
    violations: list = field(default_factory=list)  # (x, y, delta, gap)
    notes: str = ""

    @property
    def consistent(self) -> bool:
        return not self.violations

    def summary(self) -> str:
        lines = [
            f"kernel: {self.kernel_id}  ({self.n_samples} samples per delta)",
            f"{'delta':>10}  {'worst gap':>14}  {'analytic zeta':>14}  status",
        ]
        for d, g, z in zip(self.delta_grid, self.worst_gap, self.analytic_zeta):
            ok = g <= z * (1.0 + CERT_TOL)
            lines.append(
                f"{d:>10.4g}  {g:>14.6e}  {z:>14.6e}  "
                + ("consistent" if ok else "VIOLATION")
            )
        if self.notes:
            lines.append(f"note: {self.notes}")
        return "\n".join(lines)

    def csv_rows(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["delta", "worst_gap", "analytic_zeta", "n_samples"])
        for d, g, z in zip(self.delta_grid, self.worst_gap, self.analytic_zeta):
            writer.writerow([f"{d:.17g}", f"{g:.17g}", f"{z:.17g}", self.n_samples])
        return buf.getvalue()


def certify(kernel: Kernel, delta_grid, n_samples: int, seed: int,
            cert_tol: float = CERT_TOL, floor: float = 0.1) -> HrucReport:
    """Sample pairs with dual distance <= delta and record the worst gap.

    Base points come from the kernel's interior sampler; the second point is
    the inverse mirror image of a uniformly drawn dual perturbation, so the
    pair's dual distance equals the perturbation norm by construction.
    Each delta gets its own substream keyed by (seed, delta index) and the
    whole sample matrix is drawn before any evaluation, so the max-reduction
    is order-independent and reproducible under any parallel schedule.
    """
    delta_grid = [float(d) for d in delta_grid]
    if not delta_grid or n_samples < 1:
        raise ValueError("need a nonempty grid and at least one sample")
    d = kernel.dim
    worst, zetas, violations = [], [], []
    for j, delta in enumerate(delta_grid):
        rng = np.random.default_rng([seed, j])
        X = kernel.sample_interior(rng, n_samples, floor=floor)
        # uniform in the delta-ball: direction times radius^(1/d) scaling
        U = rng.standard_normal((n_samples, d))
        U /= np.linalg.norm(U, axis=1, keepdims=True)
        U *= delta * rng.random((n_samples, 1)) ** (1.0 / d)
        gap_max = 0.0
        arg_max = None
        rejected = 0
        Z = kernel.grad(X)
        try:
            Y = kernel.grad_conj(Z + U)
            ys = [Y[i] for i in range(n_samples)]
        except NotInImage:
            ys = []
            for i in range(n_samples):
                try:
                    ys.append(kernel.grad_conj(Z[i] + U[i]))
                except NotInImage:
                    ys.append(None)
                    rejected += 1
        if rejected > 0.99 * n_samples:
            raise SamplingExhausted(
                f"{kernel.name}: {rejected}/{n_samples} dual samples rejected")
        for i, y in enumerate(ys):
            if y is None:
                continue
            gap = relative_hessian_gap(kernel, X[i], y)
            if gap > gap_max:
                gap_max, arg_max = gap, (X[i].copy(), y.copy())
        zeta = kernel.zeta(delta)
        worst.append(gap_max)
        zetas.append(zeta)
        if gap_max > zeta * (1.0 + cert_tol) and arg_max is not None:
            violations.append((arg_max[0], arg_max[1], delta, gap_max))
    notes = "interior sampling only; boundary pairs are never drawn"
    if kernel.domain.simplex:
        notes += "; simplex-supported kernel sampled on the simplex interior, " \
                 "conjugate images range over the positive orthant"
    return HrucReport(
        kernel_id=kernel.name,
        delta_grid=delta_grid,
        worst_gap=worst,
        analytic_zeta=zetas,
        n_samples=n_samples,
        violations=violations,
        notes=notes,
    )


def dual_lipschitz_residual(kernel: Kernel, f_grad, f_L: float, z, x, y) -> float:
    """Residual of the dual-space Lipschitz bound; nonpositive when it holds.

    Computes |grad f(y) - grad f(x)|_{H*} - L (1 + zeta(delta)) |grad h(y)
    - grad h(x)|_{H*} with H* the inverse kernel Hessian at the reference
    covector z and delta the larger of the two dual distances to z.
    """
    z = np.asarray(z, dtype=float)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    gx, gy = kernel.grad(x), kernel.grad(y)
    delta = max(float(np.linalg.norm(gx - z)), float(np.linalg.norm(gy - z)))
    xz = kernel.grad_conj(z)

    def dual_norm(u):
        return float(np.sqrt(np.dot(u, kernel.hess_solve(xz, u))))

    lhs = dual_norm(np.asarray(f_grad(y), dtype=float) - np.asarray(f_grad(x), dtype=float))
    rhs = f_L * (1.0 + kernel.zeta(delta)) * dual_norm(gy - gx)
    return lhs - rhs
