"""Objective suites and synthetic data generation.

Three families: quadratic consensus (testing), phase retrieval with the
quartic geometry, and Poisson inverse problems (dense sensing or blurred
imaging with a smoothed total-variation penalty) with the Burg geometry.
Data generation is deterministic given the seed; the Poisson sampler is
hand-rolled from uniforms so the byte stream never depends on numpy's
internal distribution algorithms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse

from . import domains, kernels
from .errors import SamplingExhausted


# ---------------------------------------------------------------------------
# Deterministic Poisson sampling
# ---------------------------------------------------------------------------

def _poisson_inverse_transform(rng, lam):
    """Sequential inverse transform; exact, intended for lam < 30."""
    u = rng.random()
    p = math.exp(-lam)
    cdf = p
    k = 0
    # mean + 40*sqrt(mean) standard deviations is unreachable in double precision
    kmax = int(lam + 40.0 * math.sqrt(lam) + 50.0)
    while u > cdf and k < kmax:
        k += 1
        p *= lam / k
        cdf += p
    return k


def poisson_sample(rng, lam):
    """Exact Poisson draws from the generator's uniform stream.

    Means below 30 use inverse transform; larger means split recursively
    via Poisson(a+b) = Poisson(a) + Poisson(b), which keeps every step in
    the numerically safe regime.
    """
    lam = np.asarray(lam, dtype=float)
    out = np.empty(lam.shape, dtype=np.int64)
    flat = lam.ravel()
    res = out.ravel()
    for idx, lam_i in enumerate(flat):
        if lam_i < 0:
            raise ValueError("Poisson mean must be nonnegative")
        total = 0
        stack = [float(lam_i)]
        while stack:
            cur = stack.pop()
            if cur == 0.0:
                continue
            if cur < 30.0:
                total += _poisson_inverse_transform(rng, cur)
            else:
                stack.append(0.5 * cur)
                stack.append(0.5 * cur)
        res[idx] = total
    return out.reshape(lam.shape)


# ---------------------------------------------------------------------------
# Problem container
# ---------------------------------------------------------------------------


@dataclass
class Problem:
    """m local objectives over a shared domain, with gradient oracles."""

    name: str
    m: int
    d: int
    locals: list                      # objects with .value(x) and .grad(x)
    domain: domains.Domain
    f_lower: float = 0.0
    x_true: np.ndarray = None
    paired_kernel: str = ""
    meta: dict = field(default_factory=dict)

    def value(self, x) -> float:
        return float(sum(loc.value(x) for loc in self.locals) / self.m)

    def grad(self, x) -> np.ndarray:
        g = self.locals[0].grad(x).astype(float, copy=True)
        for loc in self.locals[1:]:
            g += loc.grad(x)
        return g / self.m

    def local_value(self, i, x) -> float:
        return float(self.locals[i].value(x))

    def local_grad(self, i, x) -> np.ndarray:
        return self.locals[i].grad(x)

    def grads_rowwise(self, X) -> np.ndarray:
        """Per-agent gradients of the m rows of X, stacked (m, d)."""
        if self._batch_grad is not None:
            return self._batch_grad(X)
        return np.stack([self.locals[i].grad(X[i]) for i in range(self.m)])

    _batch_grad = None

    def permuted(self, perm) -> "Problem":
        """Same problem with agents relabelled by the permutation."""
        import copy

        p = copy.copy(self)
        p.locals = [self.locals[j] for j in perm]
        return p


# ---------------------------------------------------------------------------
# Quadratic consensus (test problem)
# ---------------------------------------------------------------------------


class _QuadraticLocal:
    def __init__(self, Q, c):
        self.Q = Q
        self.c = c

    def value(self, x):
        r = np.asarray(x, dtype=float) - self.c
        return 0.5 * float(r @ self.Q @ r)

    def grad(self, x):
        return self.Q @ (np.asarray(x, dtype=float) - self.c)


def quadratic_consensus(d, m, seed, cond=10.0) -> Problem:
    """Strongly convex quadratics with distinct centers; exact L and f*."""
    rng = np.random.default_rng(seed)
    locs = []
    for _ in range(m):
        M = rng.standard_normal((d, d))
        Q, _ = np.linalg.qr(M)
        vals = np.exp(rng.uniform(0.0, np.log(cond), d))
        Q = (Q * vals) @ Q.T
        Q = 0.5 * (Q + Q.T)
        locs.append(_QuadraticLocal(Q, rng.standard_normal(d)))
    Qbar = sum(loc.Q for loc in locs) / m
    rhs = sum(loc.Q @ loc.c for loc in locs) / m
    x_star = np.linalg.solve(Qbar, rhs)
    prob = Problem(
        name="quadratic", m=m, d=d, locals=locs, domain=domains.reals(d),
        x_true=x_star, paired_kernel="euclidean",
    )
    prob.f_lower = prob.value(x_star)
    prob.meta["L_exact"] = float(max(np.linalg.norm(loc.Q, 2) for loc in locs))
    return prob


# ---------------------------------------------------------------------------
# Entropy-matched test problem (Boltzmann-Shannon geometry)
# ---------------------------------------------------------------------------


class _EntropyLocal:
    """c * sum(x log x - x) + a.x: Hessian is exactly c * diag(1/x)."""

    def __init__(self, c, a):
        self.c = c
        self.a = a

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return self.c * float(np.sum(x * np.log(x) - x)) + float(self.a @ x)

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        return self.c * np.log(x) + self.a


def entropy_consensus(d, m, seed) -> Problem:
    """Orthant problem exactly smooth relative to Boltzmann-Shannon."""
    rng = np.random.default_rng(seed)
    cs = rng.uniform(0.5, 2.0, m)
    As = rng.uniform(0.0, 1.0, (m, d))
    locs = [_EntropyLocal(float(cs[i]), As[i]) for i in range(m)]
    cbar = float(np.mean(cs))
    abar = As.mean(axis=0)
    # coordinatewise minimum of cbar*(t log t - t) + abar_j t is -cbar*exp(-abar_j/cbar)
    f_lower = float(-cbar * np.sum(np.exp(-abar / cbar)))
    prob = Problem(
        name="entropy", m=m, d=d, locals=locs, domain=domains.orthant(d),
        f_lower=f_lower, paired_kernel="boltzmann_shannon",
    )
    prob.meta["L_exact"] = float(np.max(cs))
    return prob


# ---------------------------------------------------------------------------
# Phase retrieval
# ---------------------------------------------------------------------------


class _PhaseRetrievalLocal:
    def __init__(self, A, b):
        self.A = A  # (n, d) sensing vectors as rows
        self.b = b
        self.n = A.shape[0]

    def value(self, x):
        r = self.b - (self.A @ np.asarray(x, dtype=float)) ** 2
        return float(np.sum(r * r)) / self.n

    def grad(self, x):
        ax = self.A @ np.asarray(x, dtype=float)
        r = self.b - ax * ax
        return (-4.0 / self.n) * (self.A.T @ (r * ax))


def phase_retrieval(d, n, m, noise_sd, seed) -> Problem:
    """Quartic sensing: f_i(x) = (1/n) sum_l (b - <a, x>^2)^2.

    Sensing vectors are standard normal, measurements are squared inner
    products with the ground truth plus Gaussian noise of the given standard
    deviation.  Pairs with the quartic kernel |x|^4/4 + |x|^2/2.
    """
    rng = np.random.default_rng(seed)
    x_true = rng.uniform(0.0, 1.0, d)
    locs = []
    for _ in range(m):
        A = rng.standard_normal((n, d))
        b = (A @ x_true) ** 2
        if noise_sd > 0:
            b = b + noise_sd * rng.standard_normal(n)
        locs.append(_PhaseRetrievalLocal(A, b))
    prob = Problem(
        name="phase_retrieval", m=m, d=d, locals=locs,
        domain=domains.reals(d), f_lower=0.0, x_true=x_true,
        paired_kernel="quartic",
    )
    A_stack = np.stack([loc.A for loc in locs])
    b_stack = np.stack([loc.b for loc in locs])

    def batch_grad(X):
        ax = np.einsum("mnd,md->mn", A_stack, X)
        w = (b_stack - ax * ax) * ax
        return (-4.0 / n) * np.einsum("mnd,mn->md", A_stack, w)

    prob._batch_grad = batch_grad
    return prob


# ---------------------------------------------------------------------------
# Poisson inverse
# ---------------------------------------------------------------------------

_KL_FLOOR = 1e-300


def _kl_value(b, ax):
    ax = np.maximum(ax, _KL_FLOOR)
    terms = np.where(b > 0, b * np.log(np.maximum(b, _KL_FLOOR) / ax) - b, 0.0)
    return float(np.sum(terms + ax))


class _PoissonLocal:
    def __init__(self, A, b):
        self.A = A
        self.b = b

    def value(self, x):
        return _kl_value(self.b, self.A @ np.asarray(x, dtype=float))

    def grad(self, x):
        ax = np.maximum(self.A @ np.asarray(x, dtype=float), _KL_FLOOR)
        return self.A.T @ (1.0 - self.b / ax)


def poisson_inverse(d, n, m, seed) -> Problem:
    """Generalized KL fit of Poisson counts against a nonnegative design.

    Design entries are absolute Student-t(5) draws (all-zero rows are
    resampled), counts follow Poisson(A x_true).  Pairs with the regularized
    Burg entropy on the open positive orthant; L_analytic = max_i |b_i|_1 is
    a valid relative-smoothness modulus.
    """
    rng = np.random.default_rng(seed)
    x_true = rng.uniform(0.0, 1.0, d)
    locs = []
    for _ in range(m):
        A = np.abs(rng.standard_t(5, size=(n, d)))
        for _ in range(100):
            dead = np.nonzero(A.sum(axis=1) == 0.0)[0]
            if len(dead) == 0:
                break
            A[dead] = np.abs(rng.standard_t(5, size=(len(dead), d)))
        b = poisson_sample(rng, A @ x_true).astype(float)
        locs.append(_PoissonLocal(A, b))
    prob = Problem(
        name="poisson_inverse", m=m, d=d, locals=locs,
        domain=domains.orthant(d), f_lower=0.0, x_true=x_true,
        paired_kernel="burg",
    )
    prob.meta["L_analytic"] = float(max(np.sum(loc.b) for loc in locs))
    A_stack = np.stack([loc.A for loc in locs])
    b_stack = np.stack([loc.b for loc in locs])

    def batch_grad(X):
        ax = np.maximum(np.einsum("mnd,md->mn", A_stack, X), _KL_FLOOR)
        return np.einsum("mnd,mn->md", A_stack, 1.0 - b_stack / ax)

    prob._batch_grad = batch_grad
    return prob


# ---------------------------------------------------------------------------
# TV-regularized Poisson deblurring
# ---------------------------------------------------------------------------

EPS_TV = 1e-10


def phantom_image(d_img) -> np.ndarray:
    """Deterministic piecewise-constant test image in [0, 255]."""
    X = np.full((d_img, d_img), 40.0)
    q = max(1, d_img // 4)
    X[q:3 * q, q:3 * q] = 200.0
    X[: d_img // 2, 3 * q:] = 120.0
    ii, jj = np.meshgrid(np.arange(d_img), np.arange(d_img), indexing="ij")
    disk = (ii - 0.7 * d_img) ** 2 + (jj - 0.3 * d_img) ** 2 <= (d_img / 6.0) ** 2
    X[disk] = 255.0
    return X


def _line_stencil(length, angle):
    """Normalized stencil of a length-`length` segment at the given angle,
    rasterized with bilinear splatting."""
    half = (length - 1) / 2.0
    r = int(np.ceil(half)) + 1
    size = 2 * r + 1
    K = np.zeros((size, size))
    n_pts = max(2 * length, 8)
    ts = np.linspace(-half, half, n_pts)
    for t in ts:
        y = t * math.sin(angle) + r
        x = t * math.cos(angle) + r
        i0, j0 = int(np.floor(y)), int(np.floor(x))
        fy, fx = y - i0, x - j0
        K[i0, j0] += (1 - fy) * (1 - fx)
        K[i0, j0 + 1] += (1 - fy) * fx
        K[i0 + 1, j0] += fy * (1 - fx)
        K[i0 + 1, j0 + 1] += fy * fx
    return K / K.sum()


def blur_matrix(d_img, length, angle) -> scipy.sparse.csr_matrix:
    """Sparse matrix of the motion-blur convolution with replicate padding,
    acting on row-major flattened d_img x d_img images."""
    K = _line_stencil(length, angle)
    r = K.shape[0] // 2
    rows, cols, vals = [], [], []
    for p in range(d_img):
        for q in range(d_img):
            out = p * d_img + q
            for di in range(-r, r + 1):
                for dj in range(-r, r + 1):
                    w = K[di + r, dj + r]
                    if w == 0.0:
                        continue
                    ii = min(max(p + di, 0), d_img - 1)
                    jj = min(max(q + dj, 0), d_img - 1)
                    rows.append(out)
                    cols.append(ii * d_img + jj)
                    vals.append(w)
    M = scipy.sparse.coo_matrix((vals, (rows, cols)),
                                shape=(d_img * d_img, d_img * d_img))
    return M.tocsr()


def tv_value(X, eps=EPS_TV) -> float:
    """Smoothed isotropic TV with replicate boundary differences."""
    dv = np.diff(X, axis=0, append=X[-1:, :])
    dh = np.diff(X, axis=1, append=X[:, -1:])
    return float(np.sum(np.sqrt(dv * dv + dh * dh + eps * eps)))


def tv_grad(X, eps=EPS_TV) -> np.ndarray:
    dv = np.diff(X, axis=0, append=X[-1:, :])
    dh = np.diff(X, axis=1, append=X[:, -1:])
    s = np.sqrt(dv * dv + dh * dh + eps * eps)
    gv = dv / s
    gh = dh / s
    g = -gv - gh
    g[1:, :] += gv[:-1, :]
    g[:, 1:] += gh[:, :-1]
    return g


class _TVDeblurLocal:
    def __init__(self, A, b, lam, d_img):
        self.A = A
        self.b = b
        self.lam = lam
        self.d_img = d_img

    def value(self, x):
        x = np.asarray(x, dtype=float)
        val = _kl_value(self.b, self.A @ x)
        return val + self.lam * tv_value(x.reshape(self.d_img, self.d_img))

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        ax = np.maximum(self.A @ x, _KL_FLOOR)
        g = self.A.T @ (1.0 - self.b / ax)
        return g + self.lam * tv_grad(x.reshape(self.d_img, self.d_img)).ravel()


def tv_deblur(d_img, m, blur_len=5, alpha=10.0, lambda_tv=1e-4, seed=0) -> Problem:
    """Poisson deblurring of a synthetic phantom with a smoothed TV penalty.

    Each agent observes the phantom through a motion blur at one of eight
    angles (indexed by agent id modulo 8), corrupted by scaled Poisson noise
    B ~ Poisson(alpha * A(X)) / alpha.
    """
    if d_img < 4:
        raise ValueError("need d_img >= 4")
    rng = np.random.default_rng(seed)
    X_true = phantom_image(d_img)
    x_true = X_true.ravel()
    locs = []
    for i in range(m):
        angle = (i % 8) * math.pi / 8.0
        A = blur_matrix(d_img, blur_len, angle)
        lam_img = alpha * np.asarray(A @ x_true)
        b = poisson_sample(rng, lam_img).astype(float) / alpha
        locs.append(_TVDeblurLocal(A, b, lambda_tv, d_img))
    return Problem(
        name="tv_deblur", m=m, d=d_img * d_img, locals=locs,
        domain=domains.orthant(d_img * d_img), f_lower=0.0, x_true=x_true,
        paired_kernel="burg",
        meta={"alpha": alpha, "lambda_tv": lambda_tv, "blur_len": blur_len},
    )


# ---------------------------------------------------------------------------
# Relative smoothness estimation and image quality
# ---------------------------------------------------------------------------


def estimate_rel_smoothness(prob: Problem, kernel, n_samples=100, seed=0,
                            inflation=1.2) -> float:
    """Monte-Carlo upper estimate of the relative-smoothness modulus.

    Samples interior points and unit directions, compares the objective
    curvature |v' f'' v| (Hessian-vector products by central differences of
    the gradient) against the kernel curvature v' h'' v, and returns the
    inflated maximum ratio.
    """
    rng = np.random.default_rng(seed)
    X = kernel.sample_interior(rng, n_samples)
    ratio_max = 0.0
    used = 0
    for i in range(n_samples):
        x = X[i]
        if not prob.domain.is_interior(x):
            continue
        v = rng.standard_normal(prob.d)
        v /= np.linalg.norm(v)
        lo_gap = np.min(np.where(np.isfinite(prob.domain.lo),
                                 x - prob.domain.lo, np.inf))
        hi_gap = np.min(np.where(np.isfinite(prob.domain.hi),
                                 prob.domain.hi - x, np.inf))
        eps = min(1e-5 * (1.0 + float(np.linalg.norm(x))),
                  0.25 * min(lo_gap, hi_gap))
        if not np.isfinite(eps) or eps <= 0:
            eps = 1e-5
        denom_all = kernel.hess_apply(x, v) @ v
        for idx in range(prob.m):
            hv = (prob.local_grad(idx, x + eps * v)
                  - prob.local_grad(idx, x - eps * v)) / (2.0 * eps)
            num = abs(float(hv @ v))
            ratio_max = max(ratio_max, num / float(denom_all))
        used += 1
    if used == 0:
        raise SamplingExhausted("no interior sample lay in the problem domain")
    return inflation * ratio_max


def psnr(X, X_ref, peak=255.0) -> float:
    """Peak signal-to-noise ratio in dB; identical images give +inf."""
    X = np.asarray(X, dtype=float)
    X_ref = np.asarray(X_ref, dtype=float)
    if X.shape != X_ref.shape:
        raise ValueError("shape mismatch")
    mse = float(np.mean((X - X_ref) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


# ---------------------------------------------------------------------------
# Config-facing constructor
# ---------------------------------------------------------------------------


def problem_from_spec(spec: dict) -> Problem:
    spec = dict(spec)
    kind = spec.pop("kind", None)
    builders = {
        "quadratic": (quadratic_consensus, {"d", "m", "seed", "cond"}),
        "entropy": (entropy_consensus, {"d", "m", "seed"}),
        "phase_retrieval": (phase_retrieval, {"d", "n", "m", "noise_sd", "seed"}),
        "poisson": (poisson_inverse, {"d", "n", "m", "seed"}),
        "tv_deblur": (tv_deblur, {"d_img", "m", "blur_len", "alpha",
                                  "lambda_tv", "seed"}),
    }
    if kind not in builders:
        raise ValueError(f"unknown problem kind {kind!r}")
    ctor, allowed = builders[kind]
    unknown = set(spec) - allowed
    if unknown:
        raise ValueError(f"unknown problem keys: {sorted(unknown)}")
    return ctor(**spec)


def default_kernel_for(prob: Problem, dim=None):
    """The geometry each problem family pairs with in the experiments."""
    dim = prob.d if dim is None else dim
    table = {
        "euclidean": kernels.euclidean,
        "quartic": kernels.quartic,
        "burg": kernels.burg,
        "boltzmann_shannon": kernels.boltzmann_shannon,
    }
    return table[prob.paired_kernel](dim)
