import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eeopt.errors import DomainError
from eeopt.network import evaluate, sinr
from eeopt.surrogate import (
    bound_coefficients,
    build,
    rate_evaluation,
    surrogate_g,
    surrogate_psi,
    surrogate_rate,
    weighted_rate_hessian,
)

from helpers import central_diff, random_alloc, random_instance, rel_err


def true_rate(instance, q, user):
    return float(evaluate(instance, np.exp2(q)).rate[user])


def true_psi(instance, q, v, user):
    rep = evaluate(instance, np.exp2(q))
    consumed = instance.amp_inefficiency[user] * np.exp2(q[user]).sum() + instance.static_power[user]
    return float(rep.rate[user] - consumed * 2.0**v)


def true_g(instance, q, u):
    rep = evaluate(instance, np.exp2(q))
    return float(rep.rate_total - rep.power_total * 2.0**u)


class TestBoundCoefficients:
    def test_unit_sinr(self):
        a, b = bound_coefficients(1.0)
        assert a == pytest.approx(0.5)
        assert b == pytest.approx(1.0)

    def test_zero_sinr_conventions(self):
        assert bound_coefficients(0.0) == (0.0, 0.0)

    def test_sinr_three(self):
        a, b = bound_coefficients(3.0)
        assert a == pytest.approx(0.75)
        assert b == pytest.approx(2.0 - 0.75 * np.log2(3.0))
        assert b == pytest.approx(0.8112781244591328)

    @pytest.mark.parametrize("bad", [-1e-9, -3.0, np.inf, np.nan])
    def test_invalid_inputs(self, bad):
        with pytest.raises(DomainError):
            bound_coefficients(bad)

    def test_tightness_on_log_grid(self):
        gamma = np.logspace(-6, 6, 481)
        a, b = bound_coefficients(gamma)
        assert np.all(a >= 0.0) and np.all(a < 1.0)
        lhs = a * np.log2(gamma) + b
        rhs = np.log2(1.0 + gamma)
        assert np.max(rel_err(lhs, rhs)) < 1e-12

    def test_bound_never_exceeds_true_curve(self):
        gamma_prime = np.logspace(-3, 3, 25)
        gamma = np.logspace(-4, 4, 200)
        for gp in gamma_prime:
            a, b = bound_coefficients(float(gp))
            assert np.all(a * np.log2(gamma) + b <= np.log2(1.0 + gamma) + 1e-12)

    @given(st.floats(min_value=1e-12, max_value=1e12))
    @settings(max_examples=300, deadline=None)
    def test_tightness_property(self, gamma):
        a, b = bound_coefficients(gamma)
        assert 0.0 <= a < 1.0
        lhs = a * np.log2(gamma) + b
        assert lhs == pytest.approx(np.log2(1.0 + gamma), rel=1e-12, abs=1e-12)


class TestBuild:
    def test_expansion_matches_current_sinr(self):
        rng = np.random.default_rng(10)
        inst = random_instance(rng, 3, 2)
        p = random_alloc(rng, inst)
        model = build(inst, p)
        np.testing.assert_allclose(model.coefficients.expansion_sinr, sinr(inst, p), rtol=1e-13)
        np.testing.assert_allclose(model.expansion_q, np.log2(p), rtol=1e-13)

    def test_zero_power_rejected(self):
        rng = np.random.default_rng(11)
        inst = random_instance(rng, 2, 2)
        p = random_alloc(rng, inst)
        p[0, 1] = 0.0
        with pytest.raises(DomainError, match="strictly positive"):
            build(inst, p)

    def test_single_user_rate_is_affine_in_q(self):
        # no interferers: the log-denominator is the constant noise
        rng = np.random.default_rng(12)
        inst = random_instance(rng, 1, 3)
        model = build(inst, random_alloc(rng, inst))
        q0 = rng.normal(size=(1, 3))
        d = rng.normal(size=(1, 3))
        vals = [surrogate_rate(model, q0 + t * d, 0)[0] for t in (-1.0, 0.0, 1.0)]
        assert vals[0] + vals[2] == pytest.approx(2 * vals[1], rel=1e-12)


class TestSurrogateRate:
    def test_tight_at_expansion(self):
        rng = np.random.default_rng(13)
        for _ in range(20):
            inst = random_instance(rng, int(rng.integers(1, 5)), int(rng.integers(1, 4)))
            p = random_alloc(rng, inst)
            model = build(inst, p)
            q = np.log2(p)
            for i in range(inst.n_users):
                val, _ = surrogate_rate(model, q, i)
                assert rel_err(val, true_rate(inst, q, i)) < 1e-10

    def test_minorizes_true_rate(self):
        rng = np.random.default_rng(14)
        for _ in range(20):
            inst = random_instance(rng, 3, 2)
            p = random_alloc(rng, inst)
            model = build(inst, p)
            for _ in range(10):
                q = np.log2(p) + rng.uniform(-2.0, 2.0, size=p.shape)
                for i in range(inst.n_users):
                    val, _ = surrogate_rate(model, q, i)
                    assert val <= true_rate(inst, q, i) + 1e-9

    def test_gradient_matches_true_rate_at_expansion(self):
        rng = np.random.default_rng(15)
        for _ in range(10):
            inst = random_instance(rng, 3, 2)
            p = random_alloc(rng, inst)
            model = build(inst, p)
            q = np.log2(p)
            for i in range(inst.n_users):
                _, grad = surrogate_rate(model, q, i)
                fd = central_diff(lambda qq: true_rate(inst, qq, i), q)
                assert np.max(rel_err(grad.ravel(), fd, floor=1e-6)) < 1e-5

    def test_gradient_matches_surrogate_anywhere(self):
        rng = np.random.default_rng(16)
        inst = random_instance(rng, 3, 2)
        model = build(inst, random_alloc(rng, inst))
        q = model.expansion_q + rng.uniform(-1, 1, size=model.expansion_q.shape)
        for i in range(inst.n_users):
            _, grad = surrogate_rate(model, q, i)
            fd = central_diff(lambda qq: surrogate_rate(model, qq, i)[0], q)
            assert np.max(rel_err(grad.ravel(), fd, floor=1e-6)) < 1e-5


class TestSurrogatePsi:
    def test_decreasing_in_v_and_rate_limit(self):
        rng = np.random.default_rng(17)
        inst = random_instance(rng, 2, 2)
        model = build(inst, random_alloc(rng, inst))
        q = model.expansion_q
        vals = [surrogate_psi(model, q, v, 0)[0] for v in (2.0, 0.0, -5.0, -20.0)]
        assert vals == sorted(vals)
        rate0, _ = surrogate_rate(model, q, 0)
        assert surrogate_psi(model, q, -40.0, 0)[0] == pytest.approx(rate0, rel=1e-9)

    def test_zero_at_expansion_for_min_ee_user(self):
        rng = np.random.default_rng(18)
        for _ in range(10):
            inst = random_instance(rng, 3, 2)
            p = random_alloc(rng, inst)
            rep = evaluate(inst, p)
            model = build(inst, p)
            v = np.log2(rep.ee_min)
            i = int(np.argmin(rep.ee))
            val, _, _ = surrogate_psi(model, np.log2(p), v, i)
            assert abs(val) <= 1e-9 * max(rep.rate[i], 1.0)

    def test_minorizes_true_psi_at_random_points(self):
        rng = np.random.default_rng(19)
        checked = 0
        while checked < 100:
            inst = random_instance(rng, 3, 2)
            p = random_alloc(rng, inst)
            model = build(inst, p)
            q = np.log2(p) + rng.uniform(-2, 2, size=p.shape)
            v = rng.uniform(-3, 3)
            for i in range(inst.n_users):
                val, _, _ = surrogate_psi(model, q, v, i)
                assert val <= true_psi(inst, q, v, i) + 1e-9
                checked += 1

    def test_gradients(self):
        rng = np.random.default_rng(20)
        inst = random_instance(rng, 2, 2)
        model = build(inst, random_alloc(rng, inst))
        q = model.expansion_q + rng.uniform(-0.5, 0.5, size=model.expansion_q.shape)
        v = 0.3
        for i in range(inst.n_users):
            _, gq, gv = surrogate_psi(model, q, v, i)
            fd_q = central_diff(lambda qq: surrogate_psi(model, qq, v, i)[0], q)
            fd_v = central_diff(lambda vv: surrogate_psi(model, q, float(vv), i)[0], np.array(v))
            assert np.max(rel_err(gq.ravel(), fd_q, floor=1e-6)) < 1e-5
            assert rel_err(gv, fd_v[0]) < 1e-5
            # tightness of the gradient against the true function at the expansion
            _, gq0, gv0 = surrogate_psi(model, model.expansion_q, v, i)
            fd_true = central_diff(lambda qq: true_psi(inst, qq, v, i), model.expansion_q)
            assert np.max(rel_err(gq0.ravel(), fd_true, floor=1e-6)) < 1e-5


class TestSurrogateG:
    def test_zero_at_expansion_total_ee(self):
        rng = np.random.default_rng(21)
        for _ in range(10):
            inst = random_instance(rng, 3, 2)
            p = random_alloc(rng, inst)
            rep = evaluate(inst, p)
            model = build(inst, p)
            val, _, _ = surrogate_g(model, np.log2(p), np.log2(rep.ee_total))
            assert abs(val) <= 1e-9 * rep.rate_total

    def test_strictly_increasing_as_u_decreases(self):
        rng = np.random.default_rng(22)
        inst = random_instance(rng, 2, 2)
        p = random_alloc(rng, inst)
        rep = evaluate(inst, p)
        model = build(inst, p)
        u = np.log2(rep.ee_total)
        v0, _, _ = surrogate_g(model, np.log2(p), u)
        v1, _, _ = surrogate_g(model, np.log2(p), u - 1.0)
        assert v1 > v0

    def test_minorizes_true_g(self):
        rng = np.random.default_rng(23)
        for _ in range(25):
            inst = random_instance(rng, 3, 2)
            p = random_alloc(rng, inst)
            model = build(inst, p)
            q = np.log2(p) + rng.uniform(-2, 2, size=p.shape)
            u = rng.uniform(-3, 3)
            val, _, _ = surrogate_g(model, q, u)
            assert val <= true_g(inst, q, u) + 1e-9

    def test_gradients(self):
        rng = np.random.default_rng(24)
        inst = random_instance(rng, 3, 2)
        model = build(inst, random_alloc(rng, inst))
        q = model.expansion_q + rng.uniform(-0.5, 0.5, size=model.expansion_q.shape)
        u = -0.4
        _, gq, gu = surrogate_g(model, q, u)
        fd_q = central_diff(lambda qq: surrogate_g(model, qq, u)[0], q)
        fd_u = central_diff(lambda uu: surrogate_g(model, q, float(uu))[0], np.array(u))
        assert np.max(rel_err(gq.ravel(), fd_q, floor=1e-6)) < 1e-5
        assert rel_err(gu, fd_u[0]) < 1e-5


class TestConcavity:
    def midpoint_gap(self, f, x, y):
        mid = tuple(0.5 * (a + b) for a, b in zip(x, y))
        return f(mid) - 0.5 * (f(x) + f(y))

    def test_midpoint_concavity_of_all_tilde_functions(self):
        rng = np.random.default_rng(25)
        for _ in range(20):
            inst = random_instance(rng, 3, 2)
            model = build(inst, random_alloc(rng, inst))
            shape = model.expansion_q.shape

            def sample():
                return (
                    model.expansion_q + rng.uniform(-2, 2, size=shape),
                    rng.uniform(-2, 2),
                )

            (qx, tx), (qy, ty) = sample(), sample()
            for i in range(inst.n_users):
                gap_rate = self.midpoint_gap(
                    lambda z: surrogate_rate(model, z[0], i)[0],
                    (qx, tx), (qy, ty),
                )
                gap_psi = self.midpoint_gap(
                    lambda z: surrogate_psi(model, z[0], z[1], i)[0],
                    (qx, tx), (qy, ty),
                )
                assert gap_rate >= -1e-12
                assert gap_psi >= -1e-12
            gap_g = self.midpoint_gap(
                lambda z: surrogate_g(model, z[0], z[1])[0], (qx, tx), (qy, ty)
            )
            assert gap_g >= -1e-12


class TestWeightedHessian:
    def test_matches_finite_difference_of_jacobian(self):
        rng = np.random.default_rng(26)
        inst = random_instance(rng, 3, 2)
        model = build(inst, random_alloc(rng, inst))
        q = model.expansion_q + rng.uniform(-0.5, 0.5, size=model.expansion_q.shape)
        w = rng.uniform(0.1, 2.0, size=inst.n_users)
        ev = rate_evaluation(model, q)
        h = weighted_rate_hessian(model, ev, w)

        def weighted_grad(qq):
            evq = rate_evaluation(model, qq)
            return np.einsum("i,ijk->jk", w, evq.jac).ravel()

        n = q.size
        fd = np.zeros((n, n))
        step = 1e-6
        for c in range(n):
            hi = q.ravel().copy()
            lo = q.ravel().copy()
            hi[c] += step
            lo[c] -= step
            fd[:, c] = (weighted_grad(hi.reshape(q.shape)) - weighted_grad(lo.reshape(q.shape))) / (2 * step)
        np.testing.assert_allclose(h, fd, atol=1e-6 * max(1.0, np.abs(fd).max()))
        np.testing.assert_allclose(h, h.T, atol=1e-12)
        # negative semidefinite
        eig = np.linalg.eigvalsh(h)
        assert eig.max() <= 1e-10
