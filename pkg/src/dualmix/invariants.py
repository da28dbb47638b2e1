"""Runnable property suite behind the ``check-invariants`` CLI subcommand.

Each check is a pure function returning (ok, detail).  They mirror the
lemma-level claims the package is built on: oracle consistency, kernel
identities, mixing contraction, clipping bounds, and tracking.
"""

from __future__ import annotations

import math

import numpy as np

from . import algorithms, diagnostics, kernels, network, problems


def _fd_grad(k, x, eps):
    g = np.empty_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = eps
        g[i] = (k.value(x + e) - k.value(x - e)) / (2 * eps)
    return g


def _safe_eps(domain, x, base=1e-6):
    lo_gap = np.min(np.where(np.isfinite(domain.lo), x - domain.lo, np.inf))
    hi_gap = np.min(np.where(np.isfinite(domain.hi), domain.hi - x, np.inf))
    eps = min(base * (1.0 + float(np.linalg.norm(x))), 0.25 * min(lo_gap, hi_gap))
    return eps if np.isfinite(eps) and eps > 0 else base


def _test_kernels(d=4, n_pts=20, seed=3):
    cat = kernels.table_catalogue(d)
    cat["fermi_dirac"] = kernels.fermi_dirac(d)
    worst_g, worst_h, worst_inv, worst_tp = 0.0, 0.0, 0.0, 0.0
    for k in cat.values():
        rng = np.random.default_rng([seed, hash(k.name) % 2**31])
        X = k.sample_interior(rng, n_pts + 2)
        for i in range(n_pts):
            x = X[i]
            eps = _safe_eps(k.domain, x)
            g = k.grad(x)
            gf = _fd_grad(k, x, eps)
            worst_g = max(worst_g, float(np.max(np.abs(g - gf)))
                          / (1.0 + float(np.max(np.abs(g)))))
            v = rng.standard_normal(d)
            v /= np.linalg.norm(v)
            hv = k.hess_apply(x, v)
            hvf = (k.grad(x + eps * v) - k.grad(x - eps * v)) / (2 * eps)
            worst_h = max(worst_h, float(np.max(np.abs(hv - hvf)))
                          / (1.0 + float(np.max(np.abs(hv)))))
            z = k.grad(x) + 0.3 * rng.standard_normal(d)
            xi = k.grad_conj(z)
            worst_inv = max(worst_inv, float(np.linalg.norm(k.grad(xi) - z))
                            / (1.0 + float(np.linalg.norm(z))))
        # three-point identity on interior triples
        for i in range(5):
            x, y, z3 = X[i], X[i + 1], X[i + 2]
            lhs = k.bregman(x, z3) - k.bregman(x, y) - k.bregman(y, z3)
            rhs = float((k.grad(y) - k.grad(z3)) @ (x - y))
            worst_tp = max(worst_tp, abs(lhs - rhs) / (1.0 + abs(rhs)))
    ok = worst_g < 5e-5 and worst_h < 5e-4 and worst_inv < 1e-8 and worst_tp < 1e-10
    return ok, (f"grad fd {worst_g:.2e}, hess fd {worst_h:.2e}, "
                f"inverse {worst_inv:.2e}, three-point {worst_tp:.2e}")


def _test_moduli():
    cat = kernels.table_catalogue(4)
    grid = np.logspace(-4, 1, 30)
    ok = True
    for k in cat.values():
        vals = [k.zeta(d) for d in grid]
        ok = ok and k.zeta(0.0) == 0.0 and all(
            a <= b + 1e-15 for a, b in zip(vals, vals[1:]))
    return ok, "zeta(0)=0 and monotone on a log grid"


def _test_matrix_bound(n_cases=50, seed=11):
    rng = np.random.default_rng(seed)
    worst = -math.inf
    for _ in range(n_cases):
        d = rng.integers(2, 7)
        Qa = rng.standard_normal((d, d))
        Qb = rng.standard_normal((d, d))
        A = Qa @ Qa.T + 0.2 * np.eye(d)
        B = Qb @ Qb.T + 0.2 * np.eye(d)
        alpha = np.linalg.norm(A @ np.linalg.inv(B) - np.eye(d), 2)
        vals_a, vecs_a = np.linalg.eigh(A)
        vals_b, vecs_b = np.linalg.eigh(B)
        As = (vecs_a * np.sqrt(vals_a)) @ vecs_a.T
        Bs = (vecs_b * np.sqrt(vals_b)) @ vecs_b.T
        lhs = np.linalg.norm(As @ np.linalg.inv(Bs), 2)
        worst = max(worst, lhs - math.sqrt(1 + alpha) * (1 + 1e-10))
    return worst <= 0, f"max residual {worst:.2e}"


def _test_mixing_and_contraction(n_cases=50, seed=5):
    rng = np.random.default_rng(seed)
    ok = True
    for c in range(n_cases):
        m = int(rng.integers(2, 17))
        d = int(rng.integers(1, 9))
        g = network.erdos_renyi(m, 0.5, seed=int(rng.integers(0, 10**6)))
        mix = network.metropolis_weights(g)
        mix.validate()
        Q = rng.standard_normal((d, d))
        H = Q @ Q.T + 0.3 * np.eye(d)
        alpha = (1 - mix.rho) / 2
        E = rng.standard_normal((d, d))
        E = 0.5 * (E + E.T)
        E *= 0.9 * alpha / max(np.linalg.norm(E, 2), 1e-12)
        vals, vecs = np.linalg.eigh(H)
        Hs = (vecs * np.sqrt(vals)) @ vecs.T
        H_plus = Hs @ (np.eye(d) + E) @ Hs
        V = rng.standard_normal((m, d))
        U = rng.standard_normal((m, d))
        ok = ok and network.contraction_check(mix, H, H_plus, V, U)
    return ok, f"{n_cases} random contraction instances"


def _test_clip(seed=2):
    rng = np.random.default_rng(seed)
    ok = True
    for _ in range(200):
        v = rng.standard_normal(5) * rng.uniform(0, 10)
        eta = rng.uniform(0.01, 2.0)
        delta = rng.uniform(0.01, 2.0)
        c = algorithms.clip(v, eta, delta)
        ok = ok and np.linalg.norm(c) <= delta * (1 + 1e-12)
        if eta * np.linalg.norm(v) <= delta:
            ok = ok and np.allclose(c, eta * v)
    ok = ok and np.all(algorithms.clip(np.zeros(3), 0.1, 1.0) == 0)
    return ok, "norm cap and small-step linearity"


def _test_run_invariants(seed=9):
    prob = problems.quadratic_consensus(d=6, m=5, seed=seed)
    mix = network.metropolis_weights(network.erdos_renyi(5, 0.6, seed=seed))
    k = kernels.euclidean(6)
    L = prob.meta["L_exact"]
    cfg = algorithms.AlgoConfig(algorithm="dmgt", eta=0.02, delta=0.5,
                                max_iter=60)
    worst_track, worst_clip = 0.0, -math.inf

    def hook(t, prev, cur):
        nonlocal worst_track, worst_clip
        worst_track = max(worst_track, diagnostics.tracking_residual(cur, prob))
        rs = diagnostics.clipping_bound_residuals(prev, cur, cfg.delta, mix.rho)
        worst_clip = max(worst_clip, *rs)

    res = algorithms.run(prob, k, mix, cfg, x0=np.zeros(6), L=L, hooks=[hook])
    ok = (res.status == "done" and worst_track < 1e-10
          and worst_clip <= 1e-10)
    return ok, (f"tracking {worst_track:.2e}, clip-bound residual "
                f"{worst_clip:.2e}")


def _test_problem_gradients(seed=4):
    probs = [
        problems.phase_retrieval(d=8, n=6, m=3, noise_sd=0.1, seed=seed),
        problems.poisson_inverse(d=8, n=6, m=3, seed=seed),
        problems.tv_deblur(d_img=6, m=2, blur_len=3, seed=seed),
    ]
    worst = 0.0
    for prob in probs:
        rng = np.random.default_rng([seed, 1])
        X = prob.domain.sample_interior(rng, 10)
        for i in range(10):
            x = X[i]
            eps = _safe_eps(prob.domain, x, base=1e-6)
            g = prob.grad(x)
            gf = np.empty_like(g)
            for j in range(prob.d):
                e = np.zeros_like(x)
                e[j] = eps
                gf[j] = (prob.value(x + e) - prob.value(x - e)) / (2 * eps)
            worst = max(worst, float(np.max(np.abs(g - gf)))
                        / (1.0 + float(np.max(np.abs(g)))))
    return worst < 1e-5, f"worst relative gradient error {worst:.2e}"


CHECKS = [
    ("kernel oracles (fd, inverse, three-point)", _test_kernels),
    ("distortion moduli (zero at 0, monotone)", _test_moduli),
    ("matrix square-root norm bound", _test_matrix_bound),
    ("mixing matrices and contraction", _test_mixing_and_contraction),
    ("clipping operator", _test_clip),
    ("tracking identity and iterate bounds", _test_run_invariants),
    ("problem gradient oracles", _test_problem_gradients),
]


def run_all(verbose=True):
    """Run every check; returns the number of failures."""
    failures = 0
    for name, fn in CHECKS:
        try:
            ok, detail = fn()
        except Exception as exc:  # noqa: BLE001 - report, don't crash the suite
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        failures += 0 if ok else 1
        if verbose:
            print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return failures
