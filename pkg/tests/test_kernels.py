import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import fd_gradient, safe_eps
from dualmix import kernels
from dualmix.errors import DomainViolation, ModeMismatch, SingularMatrix
from dualmix.modulus import self_concordant_modulus, separable_modulus


# ---------------------------------------------------------------------------
# Frozen example values (oracles computed by hand / closed form)
# ---------------------------------------------------------------------------


def test_euclidean_values():
    k = kernels.euclidean(2)
    x = np.array([3.0, 4.0])
    assert k.value(x) == pytest.approx(12.5)
    np.testing.assert_allclose(k.grad(x), x)
    np.testing.assert_allclose(k.grad_conj(x), x)
    np.testing.assert_allclose(k.hess_apply(x, np.array([1.0, 2.0])),
                               [1.0, 2.0])
    assert k.bregman(np.array([1.0, 0.0]), np.array([0.0, 0.0])) == \
        pytest.approx(0.5)
    assert k.dual_dist(x, np.zeros(2)) == pytest.approx(5.0)
    assert k.zeta(12.3) == 0.0


def test_boltzmann_shannon_values():
    k = kernels.boltzmann_shannon(2)
    assert k.value(np.array([1.0, 1.0])) == pytest.approx(-2.0)
    np.testing.assert_allclose(k.grad(np.array([math.e, 1.0])), [1.0, 0.0],
                               atol=1e-14)
    np.testing.assert_allclose(k.grad_conj(np.array([0.0, 1.0])),
                               [1.0, math.e])
    np.testing.assert_allclose(k.hess_apply(np.array([0.5, 2.0]),
                                            np.array([1.0, 1.0])),
                               [2.0, 0.5])
    # generalized KL divergence: sum u log(u/v) - u + v
    got = k.bregman(np.array([1.0, 1.0]), np.array([math.e, math.e]))
    assert got == pytest.approx(2.0 * (math.e - 2.0), rel=1e-12)
    assert k.dual_dist(np.array([math.e, 1.0]),
                       np.array([1.0, 1.0])) == pytest.approx(1.0)
    assert k.zeta(1.0) == pytest.approx(math.e - 1.0)


def test_burg_values():
    k = kernels.burg(1, mu=1.0)
    assert k.value(np.array([1.0])) == pytest.approx(0.5)
    np.testing.assert_allclose(k.grad_conj(np.array([0.0])), [1.0])
    assert k.zeta(1.0) == pytest.approx(math.e - 1.0)
    k4 = kernels.burg(1, mu=4.0)
    assert k4.zeta(2.0) == pytest.approx(math.e - 1.0)  # exp(delta/sqrt(mu))-1


def test_power_kernel_values():
    k = kernels.power(2, mu=1.0, r=1.0)
    np.testing.assert_allclose(k.grad(np.array([1.0, 0.0])), [2.0, 0.0])
    np.testing.assert_allclose(
        k.hess_apply(np.array([1.0, 0.0]), np.array([0.0, 1.0])), [0.0, 2.0])
    assert k.zeta(1.0) == pytest.approx(20.0)  # max{10, 4} * (1 + 1)
    q = kernels.quartic(2)
    x = np.array([1.0, 1.0])
    assert q.value(x) == pytest.approx(0.25 * 4.0 + 0.5 * 2.0)


def test_hellinger_closed_form_inverse():
    k = kernels.hellinger(3)
    z = np.array([-2.0, 0.0, 5.0])
    x = k.grad_conj(z)
    np.testing.assert_allclose(k.grad(x), z, atol=1e-12)
    assert np.all(np.abs(x) < 1.0)


def test_bregman_basics(any_kernel):
    k = any_kernel
    rng = np.random.default_rng(11)
    X = k.sample_interior(rng, 6)
    for i in range(3):
        u, v = X[2 * i], X[2 * i + 1]
        assert k.bregman(u, u) == pytest.approx(0.0, abs=1e-12)
        d = k.bregman(u, v)
        assert d >= -1e-12
        if not np.allclose(u, v):
            assert d > 0.0


def test_dual_dist_metric_properties(any_kernel):
    k = any_kernel
    rng = np.random.default_rng(3)
    x, y, z = k.sample_interior(rng, 3)
    assert k.dual_dist(x, x) == 0.0
    assert k.dual_dist(x, y) == pytest.approx(k.dual_dist(y, x))
    assert k.dual_dist(x, z) <= k.dual_dist(x, y) + k.dual_dist(y, z) + 1e-12


def test_domain_violations():
    bs = kernels.boltzmann_shannon(2)
    with pytest.raises(DomainViolation):
        bs.value(np.array([1.0, 0.0]))
    with pytest.raises(DomainViolation):
        bs.grad(np.array([-1.0, 1.0]))
    h = kernels.hellinger(1)
    with pytest.raises(DomainViolation):
        h.value(np.array([1.0]))


# ---------------------------------------------------------------------------
# Oracle consistency across the whole catalogue
# ---------------------------------------------------------------------------


def test_gradient_matches_finite_differences(any_kernel):
    k = any_kernel
    rng = np.random.default_rng(7)
    X = k.sample_interior(rng, 100)
    worst = 0.0
    for i in range(100):
        x = X[i]
        eps = safe_eps(k.domain, x)
        g = k.grad(x)
        gf = fd_gradient(k.value, x, eps)
        worst = max(worst, float(np.max(np.abs(g - gf)))
                    / (1.0 + float(np.max(np.abs(g)))))
    assert worst <= 1e-6


def test_hessian_matches_gradient_differences(any_kernel):
    k = any_kernel
    rng = np.random.default_rng(13)
    X = k.sample_interior(rng, 100)
    worst = 0.0
    for i in range(100):
        x = X[i]
        eps = safe_eps(k.domain, x, base=1e-6)
        v = rng.standard_normal(k.dim)
        v /= np.linalg.norm(v)
        hv = k.hess_apply(x, v)
        hvf = (k.grad(x + eps * v) - k.grad(x - eps * v)) / (2.0 * eps)
        worst = max(worst, float(np.max(np.abs(hv - hvf)))
                    / (1.0 + float(np.max(np.abs(hv)))))
    assert worst <= 1e-5


def test_inverse_mirror_map_consistency(any_kernel):
    k = any_kernel
    rng = np.random.default_rng(5)
    X = k.sample_interior(rng, 50)
    Z = k.grad(X) + 0.5 * rng.standard_normal((50, k.dim))
    Xi = k.grad_conj(Z)
    resid = np.linalg.norm(k.grad(Xi) - Z, axis=1)
    assert np.all(resid <= 1e-8 * (1.0 + np.linalg.norm(Z, axis=1)))
    # both directions of the inversion identity
    np.testing.assert_allclose(k.grad_conj(k.grad(X[0])), X[0], rtol=1e-8,
                               atol=1e-10)


def test_hess_solve_inverts_hess_apply(any_kernel):
    k = any_kernel
    rng = np.random.default_rng(23)
    X = k.sample_interior(rng, 10)
    for i in range(10):
        v = rng.standard_normal(k.dim)
        w = k.hess_solve(X[i], k.hess_apply(X[i], v))
        np.testing.assert_allclose(w, v, rtol=1e-9, atol=1e-11)


def test_hess_matrix_spd(any_kernel):
    k = any_kernel
    rng = np.random.default_rng(29)
    X = k.sample_interior(rng, 5)
    for i in range(5):
        H = k.hess_matrix(X[i])
        np.testing.assert_allclose(H, H.T, atol=1e-10 * (1 + np.abs(H).max()))
        assert np.min(np.linalg.eigvalsh(H)) > 0


def test_three_point_identity(any_kernel):
    k = any_kernel
    rng = np.random.default_rng(31)
    X = k.sample_interior(rng, 300)
    for i in range(100):
        x, y, z = X[3 * i], X[3 * i + 1], X[3 * i + 2]
        lhs = k.bregman(x, z) - k.bregman(x, y) - k.bregman(y, z)
        rhs = float((k.grad(y) - k.grad(z)) @ (x - y))
        assert abs(lhs - rhs) <= 1e-10 * (1.0 + abs(rhs))


def test_essential_smoothness_gradient_blowup():
    # Legendre property: the mirror map diverges along boundary sequences
    cases = [
        (kernels.boltzmann_shannon(1), np.array([1.0]), np.array([0.0])),
        (kernels.burg(1), np.array([1.0]), np.array([0.0])),
        (kernels.harmonic(1), np.array([1.0]), np.array([0.0])),
        (kernels.hellinger(1), np.array([0.0]), np.array([1.0])),
        (kernels.fermi_dirac(1), np.array([0.5]), np.array([1.0])),
    ]
    for k, x0, xb in cases:
        norms = [np.linalg.norm(k.grad(x0 + (xb - x0) * (1 - 10.0**-j)))
                 for j in range(2, 13)]
        assert norms == sorted(norms)
        assert norms[-1] > 5.0 * norms[0]


# ---------------------------------------------------------------------------
# Moduli
# ---------------------------------------------------------------------------


def test_modulus_monotone_zero_at_zero(any_kernel):
    k = any_kernel
    assert k.zeta(0.0) == 0.0
    grid = np.logspace(-6, 2, 50)
    vals = [k.zeta(d) for d in grid]
    assert all(a <= b + 1e-15 for a, b in zip(vals, vals[1:]))


@given(st.floats(min_value=0.0, max_value=50.0),
       st.floats(min_value=0.0, max_value=50.0))
@settings(max_examples=100, deadline=None)
def test_modulus_monotone_hypothesis(d1, d2):
    mod = separable_modulus(1.3, 0.7)
    lo, hi = sorted([d1, d2])
    assert mod(lo) <= mod(hi) + 1e-12


def test_modulus_constructors():
    assert separable_modulus(1.0, 1.0)(1.0) == pytest.approx(math.e - 1.0)
    # Burg's table row via the sufficient conditions: G = 1/sqrt(mu), H = 1
    mu = 4.0
    assert separable_modulus(1.0 / math.sqrt(mu), 1.0)(2.0) == \
        pytest.approx(kernels.burg(1, mu=mu).zeta(2.0))
    assert self_concordant_modulus(1.0, 1.0)(1.0) == \
        pytest.approx(math.expm1(2.0))
    # Lipschitz-Hessian instance: M = rho/(2 mu^1.5) gives exp(rho d/mu^2)-1
    rho_lip, mu = 3.0, 2.0
    got = self_concordant_modulus(rho_lip / (2 * mu**1.5), mu)(0.7)
    assert got == pytest.approx(math.expm1(rho_lip * 0.7 / mu**2))
    for mod in (separable_modulus(2.0, 0.5), self_concordant_modulus(1.0, 4.0)):
        assert mod(0.0) == 0.0


def test_matrix_sqrt_norm_bound():
    # |A B^-1 - I| <= alpha implies |A^1/2 B^-1/2| <= sqrt(1+alpha)
    rng = np.random.default_rng(17)
    for _ in range(200):
        d = int(rng.integers(2, 8))
        Qa = rng.standard_normal((d, d))
        Qb = rng.standard_normal((d, d))
        A = Qa @ Qa.T + 0.1 * np.eye(d)
        B = Qb @ Qb.T + 0.1 * np.eye(d)
        alpha = np.linalg.norm(A @ np.linalg.inv(B) - np.eye(d), 2)
        va, Va = np.linalg.eigh(A)
        vb, Vb = np.linalg.eigh(B)
        As = (Va * np.sqrt(va)) @ Va.T
        Binvs = (Vb / np.sqrt(vb)) @ Vb.T
        assert np.linalg.norm(As @ Binvs, 2) <= \
            math.sqrt(1.0 + alpha) * (1.0 + 1e-10)


# ---------------------------------------------------------------------------
# Combinators
# ---------------------------------------------------------------------------


def test_concat():
    k = kernels.concat([kernels.euclidean(2), kernels.euclidean(3)])
    assert k.dim == 5 and k.zeta(1.0) == 0.0
    bs = kernels.concat([kernels.boltzmann_shannon(2),
                         kernels.boltzmann_shannon(3)])
    assert bs.zeta(1.0) == pytest.approx(math.e - 1.0)
    mixed = kernels.concat([kernels.euclidean(1), kernels.boltzmann_shannon(1)])
    assert mixed.zeta(1.0) == pytest.approx(math.e - 1.0)
    x = np.array([0.3, 0.7])
    assert mixed.value(x) == pytest.approx(
        kernels.euclidean(1).value(x[:1])
        + kernels.boltzmann_shannon(1).value(x[1:]))
    np.testing.assert_allclose(mixed.grad_conj(mixed.grad(x)), x, rtol=1e-10)


def test_affine_compose():
    bs = kernels.boltzmann_shannon(1)
    same = kernels.affine_compose(bs, c=1.0)
    assert same.zeta(0.8) == pytest.approx(bs.zeta(0.8))
    # Fermi-Dirac's second term: x -> BS(1 - x), kappa = 1
    flip = kernels.affine_compose(bs, c=1.0, A=-np.ones(1), b=np.ones(1))
    assert flip.zeta(1.0) == pytest.approx(math.e - 1.0)
    x = np.array([0.25])
    assert flip.value(x) == pytest.approx(bs.value(1.0 - x))
    np.testing.assert_allclose(flip.grad(x), -bs.grad(1.0 - x))
    scaled = kernels.affine_compose(kernels.euclidean(1), c=2.0)
    assert scaled.zeta(5.0) == 0.0
    with pytest.raises(SingularMatrix):
        kernels.affine_compose(kernels.euclidean(2), A=np.zeros((2, 2)))


def test_affine_compose_dense_consistency():
    rng = np.random.default_rng(41)
    A = rng.standard_normal((3, 3)) + 3 * np.eye(3)
    b = rng.standard_normal(3)
    base = kernels.power(3, mu=1.0, r=2.0)
    k = kernels.affine_compose(base, c=1.5, A=A, b=b)
    x = rng.standard_normal(3)
    assert k.value(x) == pytest.approx(1.5 * base.value(A @ x + b))
    eps = 1e-6
    np.testing.assert_allclose(k.grad(x), fd_gradient(k.value, x, eps),
                               rtol=1e-6, atol=1e-8)
    z = k.grad(x)
    np.testing.assert_allclose(k.grad_conj(z), x, rtol=1e-8, atol=1e-10)
    v = rng.standard_normal(3)
    np.testing.assert_allclose(k.hess_solve(x, k.hess_apply(x, v)), v,
                               rtol=1e-9, atol=1e-12)


def test_combine_modes():
    bs = kernels.boltzmann_shannon(2)
    euc = kernels.euclidean(2)
    qs = kernels.combine(bs, euc, "quadratic-shift")
    assert qs.zeta(1.0) == pytest.approx(math.e - 1.0)
    cs = kernels.combine(bs, kernels.boltzmann_shannon(2),
                         "coordinate-separable")
    assert cs.zeta(0.5) == pytest.approx(bs.zeta(0.5))
    cm = kernels.combine(bs, kernels.burg(2), "cross-monotone",
                         kappa_h=1.0, kappa_g=1.0)
    assert cm.zeta(0.5) == pytest.approx(bs.zeta(0.5) + kernels.burg(2).zeta(0.5))
    with pytest.raises(ModeMismatch):
        kernels.combine(bs, kernels.burg(2), "quadratic-shift")
    with pytest.raises(ModeMismatch):
        kernels.combine(bs, kernels.power(2), "coordinate-separable")
    with pytest.raises(ModeMismatch):
        kernels.combine(bs, kernels.burg(2), "cross-monotone")


def test_fermi_dirac_derived_kernel():
    k = kernels.fermi_dirac(2)
    x = np.array([0.2, 0.8])
    expected = np.sum(x * np.log(x) + (1 - x) * np.log(1 - x))
    # built as BS(x) + BS(1-x): carries the extra -x - (1-x) = -1 per coord
    assert k.value(x) == pytest.approx(expected - 2.0)
    np.testing.assert_allclose(k.grad(x), np.log(x / (1 - x)), rtol=1e-12)
    z = np.array([-1.0, 2.0])
    np.testing.assert_allclose(k.grad_conj(z), 1 / (1 + np.exp(-z)),
                               rtol=1e-10)
    assert k.zeta(1.0) == pytest.approx(math.e - 1.0)


def test_shifted_kernel():
    base = kernels.burg(2)
    s = np.array([0.5, -0.25])
    k = kernels.shifted(base, s)
    x = np.array([1.2, 0.4])
    assert k.value(x) == pytest.approx(base.value(x - s))
    np.testing.assert_allclose(k.minimizer(), base.minimizer() + s)
    assert not k.domain.is_interior(s)  # boundary moved with the shift


def test_quadratic_preconditioned():
    rng = np.random.default_rng(2)
    M = rng.standard_normal((3, 3))
    A = M @ M.T + np.eye(3)
    k = kernels.euclidean(3, A=A)
    x = rng.standard_normal(3)
    assert k.value(x) == pytest.approx(0.5 * x @ A @ x)
    np.testing.assert_allclose(k.grad(x), A @ x, rtol=1e-12)
    np.testing.assert_allclose(k.grad_conj(A @ x), x, rtol=1e-10)
    assert k.zeta(3.0) == 0.0
