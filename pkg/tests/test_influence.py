import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from robust_mslca import BlockStructure, InfluenceContext
from robust_mslca.blocks import block_diagonal_part, off_diagonal_part
from robust_mslca.datagen import spd_sqrt
from robust_mslca.exceptions import DegenerateSpectrumError, InputError
from robust_mslca.influence import (if_alpha, if_beta, if_bound, if_rho, if_scatter, if_t,
                                    lambda_op, standardized_norm, t_derivative)
from robust_mslca.loss import psi, xi
from robust_mslca.mslca import build_t, solve_mslca
from robust_mslca.s_estimator import s_refine

from conftest import random_spd, unit_block_model
from oracles import contaminated_fit, richardson, standardized_reference

B22 = BlockStructure((2, 2))


def two_pair_model():
    V = np.eye(4)
    V[0, 2] = V[2, 0] = 0.6
    V[1, 3] = V[3, 1] = 0.3
    return V


@pytest.fixture(scope="module")
def ctx22():
    return InfluenceContext.from_model(two_pair_model(), B22)


@pytest.fixture(scope="module")
def ctx_general():
    rng = np.random.default_rng(17)
    b = BlockStructure((2, 1, 2))
    return InfluenceContext.from_model(random_spd(rng, 5, cond=8.0), b)


def point_at_radius(ctx, r, rng):
    u = rng.standard_normal(ctx.q)
    return spd_sqrt(ctx.V) @ (r * u / np.linalg.norm(u))


def lambda_loop(x, V, blocks):
    """Term-by-term triple sum over ordered block pairs."""
    q = blocks.q
    out = np.zeros((q, q))
    for k in range(blocks.K):
        for l in range(blocks.K):
            if k == l:
                continue
            sk, sl = blocks.slice(k), blocks.slice(l)
            xk, xl = x[sk], x[sl]
            out[sk, sl] += -0.5 * np.outer(xk, xk) @ V[sk, sl]
            out[sl, sk] += -0.5 * V[sl, sk] @ np.outer(xk, xk)
            out[sk, sl] += np.outer(xk, xl)
    return out


def eigen_part_loop(x, j, ctx):
    """Eigenvector sum with its three inner-product terms, one loop per index."""
    b, V = ctx.blocks, ctx.V
    rho, B = ctx.solution.rho, ctx.solution.beta
    out = np.zeros(ctx.q)
    for m in range(ctx.q):
        if m == j:
            continue
        acc = 0.0
        for k in range(b.K):
            for l in range(b.K):
                if k == l:
                    continue
                sk, sl = b.slice(k), b.slice(l)
                xk, xl = x[sk], x[sl]
                acc += (B[sk, m] @ xk) * (xl @ B[sl, j])
                acc -= 0.5 * (B[sk, m] @ xk) * (xk @ V[sk, sl] @ B[sl, j])
                acc -= 0.5 * (xk @ V[sk, sl] @ B[sl, m]) * (xk @ B[sk, j])
        out += acc / (rho[j] - rho[m]) * B[:, m]
    return out


def uncorrected_alpha(x, j, ctx):
    """Direction influence carrying an extra norm term, for unit diagonal blocks."""
    k, spec = ctx.constants, ctx.spec
    q, d = ctx.q, standardized_norm(x, ctx)
    a = q / k.gamma1 * float(psi(d, spec)) / d
    H = 2 / k.gamma2 * (float(xi(d, spec)) - spec.b0) + q / k.gamma1 * float(psi(d, spec)) * d * (
        1 / d ** 2 - 1 / q)
    bj = ctx.solution.beta[:, j]
    Fxx = block_diagonal_part(np.outer(x, x), ctx.blocks)
    s = sum((bj[ctx.blocks.slice(kk)] @ x[ctx.blocks.slice(kk)]) ** 2 for kk in range(ctx.blocks.K))
    lam_j = eigen_part_loop(x, j, ctx) - 0.5 * (Fxx + s * np.eye(q) - 2 * np.eye(q)) @ bj
    return a * lam_j - H * bj


class TestLambda:
    def test_zero(self, ctx22):
        np.testing.assert_array_equal(lambda_op(np.zeros(4), ctx22), 0.0)

    def test_block_diagonal_model(self):
        ctx = InfluenceContext.from_model(np.diag([1.0, 2.0, 3.0, 4.0]), B22)
        x = np.array([1.0, 2.0, 3.0, 4.0])
        np.testing.assert_array_equal(lambda_op(x, ctx), off_diagonal_part(np.outer(x, x), B22))

    @pytest.mark.parametrize("dims", [(2, 3), (1, 2, 2), (1, 1, 1, 2)])
    def test_matches_triple_sum(self, dims, rng):
        b = BlockStructure(dims)
        ctx = InfluenceContext.from_model(random_spd(rng, 5, cond=5.0), b)
        for _ in range(10):
            x = rng.standard_normal(5)
            np.testing.assert_allclose(lambda_op(x, ctx), lambda_loop(x, ctx.V, b), atol=1e-12)

    def test_shape_error(self, ctx22):
        with pytest.raises(InputError):
            lambda_op(np.ones(3), ctx22)


class TestTDerivative:
    def test_equals_lambda_at_unit_blocks(self, rng):
        b = BlockStructure((2, 1, 2))
        V = unit_block_model(rng, b)
        ctx = InfluenceContext.from_model(V, b)
        for _ in range(10):
            x = rng.standard_normal(5)
            np.testing.assert_allclose(t_derivative(V, b, np.outer(x, x)), lambda_op(x, ctx),
                                       atol=1e-12)

    def test_central_differences(self, ctx_general, rng):
        V, b = ctx_general.V, ctx_general.blocks
        E = rng.standard_normal((5, 5))
        E = E + E.T
        h = 1e-5
        fd = (build_t(V + h * E, b) - build_t(V - h * E, b)) / (2 * h)
        np.testing.assert_allclose(t_derivative(V, b, E), fd, atol=1e-8)

    def test_scale_direction_is_null(self, ctx_general):
        V, b = ctx_general.V, ctx_general.blocks
        np.testing.assert_allclose(t_derivative(V, b, V), 0.0, atol=1e-12)


class TestScatterIF:
    def test_beyond_cutoff(self, ctx22, rng):
        spec, k = ctx22.spec, ctx22.constants
        x = point_at_radius(ctx22, 1.5 * spec.cutoff, rng)
        np.testing.assert_allclose(if_scatter(x, ctx22),
                                   2 / k.gamma2 * (spec.cutoff ** 2 / 6 - spec.b0) * ctx22.V,
                                   rtol=1e-12)

    def test_origin(self, ctx22):
        k = ctx22.constants
        np.testing.assert_allclose(if_scatter(np.zeros(4), ctx22),
                                   -2 * ctx22.spec.b0 / k.gamma2 * ctx22.V, rtol=1e-14)

    def test_trace_on_sphere(self):
        ctx = InfluenceContext.from_model(np.eye(2), BlockStructure((1, 1)))
        r = 0.7 * ctx.spec.cutoff
        x = r * np.array([np.cos(0.4), np.sin(0.4)])
        expected = 4 / ctx.constants.gamma2 * (float(xi(r, ctx.spec)) - ctx.spec.b0)
        assert np.trace(if_scatter(x, ctx)) == pytest.approx(expected, rel=1e-12)

    def test_symmetric(self, ctx_general, rng):
        M = if_scatter(rng.standard_normal(5), ctx_general)
        np.testing.assert_array_equal(M, M.T)


class TestTIF:
    def test_zero_beyond_cutoff(self, ctx_general, rng):
        for f in (1.0001, 1.5, 10.0):
            x = point_at_radius(ctx_general, f * ctx_general.spec.cutoff, rng)
            assert np.all(if_t(x, ctx_general) == 0.0)

    def test_single_block_point_at_block_diagonal_model(self):
        ctx = InfluenceContext.from_model(np.diag([1.0, 2.0, 1.0, 3.0]), B22)
        np.testing.assert_array_equal(if_t(np.array([0.0, 0.0, 0.5, 0.3]), ctx), 0.0)

    def test_origin(self, ctx22):
        np.testing.assert_array_equal(if_t(np.zeros(4), ctx22), 0.0)

    def test_chain_rule_unit_blocks(self, ctx22, rng):
        G = off_diagonal_part(ctx22.V, B22)
        for _ in range(10):
            x = point_at_radius(ctx22, rng.uniform(0.1, 1.0) * ctx22.spec.cutoff, rng)
            ifv = if_scatter(x, ctx22)
            D = block_diagonal_part(ifv, B22)
            rhs = -0.5 * D @ G - 0.5 * G @ D + off_diagonal_part(ifv, B22)
            np.testing.assert_allclose(if_t(x, ctx22), rhs, atol=1e-10)

    def test_chain_rule_general(self, ctx_general, rng):
        for _ in range(10):
            x = point_at_radius(ctx_general, rng.uniform(0.1, 1.0) * ctx_general.spec.cutoff, rng)
            rhs = t_derivative(ctx_general.V, ctx_general.blocks, if_scatter(x, ctx_general))
            np.testing.assert_allclose(if_t(x, ctx_general), rhs, atol=1e-10)

    def test_scalar_form_unit_blocks(self, ctx22, rng):
        x = point_at_radius(ctx22, 0.5 * ctx22.spec.cutoff, rng)
        d = standardized_norm(x, ctx22)
        a = 4 / ctx22.constants.gamma1 * float(psi(d, ctx22.spec)) / d
        np.testing.assert_allclose(if_t(x, ctx22), a * lambda_op(x, ctx22), atol=1e-13)


class TestBound:
    def test_identity_two_scalars(self):
        ctx = InfluenceContext.from_model(np.eye(2), BlockStructure((1, 1)))
        expected = 8 * ctx.spec.cutoff ** 2 / abs(ctx.constants.gamma1)
        assert if_bound(ctx) == pytest.approx(expected, rel=1e-14)

    def test_grid(self, ctx_general):
        rng = np.random.default_rng(0)
        bound = if_bound(ctx_general)
        c = ctx_general.spec.cutoff
        norms = [np.linalg.norm(if_t(point_at_radius(ctx_general, r, rng), ctx_general), 2)
                 for r in rng.uniform(0, 1.2 * c, 10_000)]
        assert max(norms) <= bound

    def test_monotone_in_scale(self, ctx_general):
        small = if_bound(ctx_general)
        big = if_bound(InfluenceContext.from_model(2 * ctx_general.V, ctx_general.blocks,
                                                   spec=ctx_general.spec))
        assert big > small


class TestRho:
    def test_quadratic_form(self, ctx_general, rng):
        x = rng.standard_normal(5)
        T = if_t(x, ctx_general)
        for j in range(5):
            b = ctx_general.solution.beta[:, j]
            assert if_rho(x, j, ctx_general) == b @ T @ b

    def test_zero_beyond_cutoff(self, ctx22, rng):
        x = point_at_radius(ctx22, 2 * ctx22.spec.cutoff, rng)
        assert if_rho(x, 0, ctx22) == 0.0

    def test_pair_sum_form(self, ctx22, rng):
        # sum over ordered block pairs of <b_k, x_k><x_l - V_lk x_k, b_l>
        V, b = ctx22.V, B22
        x = point_at_radius(ctx22, 0.6 * ctx22.spec.cutoff, rng)
        d = standardized_norm(x, ctx22)
        a = 4 / ctx22.constants.gamma1 * float(psi(d, ctx22.spec)) / d
        for j in range(4):
            bj = ctx22.solution.beta[:, j]
            total = 0.0
            for k in range(2):
                for l in range(2):
                    if k != l:
                        sk, sl = b.slice(k), b.slice(l)
                        total += (bj[sk] @ x[sk]) * ((x[sl] - V[sl, sk] @ x[sk]) @ bj[sl])
            assert if_rho(x, j, ctx22) == pytest.approx(a * total, rel=1e-10, abs=1e-13)

    def test_sum_is_zero(self, ctx_general, rng):
        for _ in range(10):
            x = rng.standard_normal(5)
            assert abs(sum(if_rho(x, j, ctx_general) for j in range(5))) <= 1e-10

    def test_index_range(self, ctx22):
        with pytest.raises(InputError):
            if_rho(np.ones(4), 4, ctx22)


class TestAlpha:
    def test_beyond_cutoff(self, ctx22, rng):
        spec, k = ctx22.spec, ctx22.constants
        x = point_at_radius(ctx22, 3 * spec.cutoff, rng)
        H = 2 / k.gamma2 * (spec.cutoff ** 2 / 6 - spec.b0)
        for j in range(4):
            np.testing.assert_allclose(if_alpha(x, j, ctx22), -0.5 * H * ctx22.solution.beta[:, j],
                                       atol=1e-13)

    def test_eigen_part_orthogonal(self, ctx_general, rng):
        x = rng.standard_normal(5)
        for j in range(5):
            assert abs(if_beta(x, j, ctx_general) @ ctx_general.solution.beta[:, j]) < 1e-13

    def test_eigen_part_matches_literal_sum(self, ctx22, rng):
        for _ in range(5):
            x = point_at_radius(ctx22, rng.uniform(0.1, 0.9) * ctx22.spec.cutoff, rng)
            d = standardized_norm(x, ctx22)
            a = 4 / ctx22.constants.gamma1 * float(psi(d, ctx22.spec)) / d
            for j in range(4):
                np.testing.assert_allclose(if_beta(x, j, ctx22), a * eigen_part_loop(x, j, ctx22),
                                           atol=1e-12)

    def test_uncorrected_form_differs_by_norm_term(self, ctx22, rng):
        for _ in range(5):
            x = point_at_radius(ctx22, rng.uniform(0.1, 0.9) * ctx22.spec.cutoff, rng)
            D = block_diagonal_part(if_scatter(x, ctx22), B22)
            for j in range(4):
                bj = ctx22.solution.beta[:, j]
                extra = -0.5 * (bj @ D @ bj) * bj
                np.testing.assert_allclose(uncorrected_alpha(x, j, ctx22) - if_alpha(x, j, ctx22),
                                           extra, atol=1e-10)

    def test_keeps_normalization(self, ctx_general, rng):
        # d/de (a' Phi a) = 2 a' Phi IF(a) + a' f(IF_V) a must vanish
        x = rng.standard_normal(5)
        sol, b = ctx_general.solution, ctx_general.blocks
        D = block_diagonal_part(if_scatter(x, ctx_general), b)
        for j in range(5):
            a = sol.alpha[:, j]
            assert abs(2 * a @ sol.phi @ if_alpha(x, j, ctx_general) + a @ D @ a) < 1e-10

    def test_directional_derivative(self, ctx_general, rng):
        V, b = ctx_general.V, ctx_general.blocks
        x = rng.standard_normal(5)
        E = if_scatter(x, ctx_general)
        h = 1e-6
        plus, minus = solve_mslca(V + h * E, b).alpha, solve_mslca(V - h * E, b).alpha
        base = ctx_general.solution.alpha
        for j in range(5):
            s_p = np.sign(plus[:, j] @ base[:, j])
            s_m = np.sign(minus[:, j] @ base[:, j])
            fd = (s_p * plus[:, j] - s_m * minus[:, j]) / (2 * h)
            np.testing.assert_allclose(if_alpha(x, j, ctx_general), fd, rtol=1e-5, atol=1e-6)

    def test_degenerate_spectrum(self):
        ctx = InfluenceContext.from_model(np.eye(4), B22)
        with pytest.raises(DegenerateSpectrumError):
            if_alpha(np.ones(4), 0, ctx)


class TestContinuity:
    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1))
    def test_across_cutoff(self, seed):
        rng = np.random.default_rng(seed)
        ctx = InfluenceContext.from_model(two_pair_model(), B22)
        u = point_at_radius(ctx, 1.0, rng)
        c = ctx.spec.cutoff
        inner, outer = u * c * (1 - 1e-10), u * c * (1 + 1e-10)
        assert np.abs(if_scatter(inner, ctx) - if_scatter(outer, ctx)).max() < 1e-8
        assert np.abs(if_t(inner, ctx) - if_t(outer, ctx)).max() < 1e-8
        for j in range(4):
            assert abs(if_rho(inner, j, ctx) - if_rho(outer, j, ctx)) < 1e-8
            assert np.abs(if_alpha(inner, j, ctx) - if_alpha(outer, j, ctx)).max() < 1e-8


@pytest.fixture(scope="module")
def reference_sample(ctx22):
    Y = standardized_reference(ctx22.V, 100_000, 11, ctx22.spec)
    base = s_refine(Y, np.zeros(4), ctx22.V, ctx22.spec, tol=1e-13)
    return Y, base


@pytest.mark.slow
class TestFiniteContamination:
    @pytest.mark.parametrize("radius", [0.3, 0.6, 0.9])
    def test_scatter_and_direction(self, ctx22, reference_sample, radius):
        Y, base = reference_sample
        x = point_at_radius(ctx22, radius * ctx22.spec.cutoff, np.random.default_rng(int(radius * 10)))
        fits = {h: contaminated_fit(Y, x, h, ctx22.spec, ctx22.V) for h in (1e-3, 5e-4)}
        ifv = if_scatter(x, ctx22)
        dV = richardson(lambda h: fits[h].V - base.V, 1e-3)
        assert np.linalg.norm(dV - ifv) / np.linalg.norm(ifv) < 2e-2

        a0 = solve_mslca(base.V, B22).alpha
        alphas = {}
        for h, f in fits.items():
            a = solve_mslca(f.V, B22).alpha
            alphas[h] = a * np.sign(np.sum(a * a0, axis=0))
        for j in range(4):
            da = richardson(lambda h: alphas[h][:, j] - a0[:, j], 1e-3)
            ia = if_alpha(x, j, ctx22)
            assert np.linalg.norm(da - ia) / np.linalg.norm(ia) < 5e-2
