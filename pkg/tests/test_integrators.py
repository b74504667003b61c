import math

import numpy as np
import pytest

from splithmc import (
    PhasePoint,
    Scheme,
    StdGaussianModel,
    StudentTModel,
    ar1_precision,
    coefficients,
    independence_step_size,
    integrate,
    matrix_power,
    propagation_matrix,
    step,
)
from splithmc.core import TargetModel

ALL_SCHEMES = list(Scheme)


class QuarticWell(TargetModel):
    """U(q) = sum q^4; steep enough to blow up unstable trajectories fast."""

    def __init__(self, dim=1):
        super().__init__()
        self._dim = dim

    @property
    def dim(self):
        return self._dim

    def potential(self, q):
        return float(np.sum(q**4))

    def _gradient(self, q):
        return 4.0 * q**3


class TestCoefficients:
    def test_two_stage_value(self):
        assert coefficients(Scheme.TWO_STAGE).a1 == pytest.approx(
            (3 - math.sqrt(3)) / 6, abs=1e-15
        )
        assert coefficients(Scheme.TWO_STAGE).a1 == pytest.approx(0.2113248654, abs=1e-10)

    def test_new_two_stage_smaller(self):
        new = coefficients(Scheme.NEW_TWO_STAGE).a1
        assert new == pytest.approx((3 - math.sqrt(5)) / 4, abs=1e-15)
        assert new == pytest.approx(0.1909830056, abs=1e-10)
        assert new < coefficients(Scheme.TWO_STAGE).a1

    def test_three_stage_rationals(self):
        c = coefficients(Scheme.THREE_STAGE)
        assert c.a1 == 12127897 / 102017882
        assert c.b1 == 4271554 / 14421423

    def test_costs_and_ranges(self):
        costs = {k: coefficients(k).gradient_cost_per_step for k in Scheme}
        assert costs == {
            Scheme.LEAPFROG: 1,
            Scheme.TWO_STAGE: 2,
            Scheme.NEW_TWO_STAGE: 2,
            Scheme.THREE_STAGE: 3,
        }
        for kind in (Scheme.TWO_STAGE, Scheme.NEW_TWO_STAGE, Scheme.THREE_STAGE):
            assert 0 < coefficients(kind).a1 < 0.5
        assert 0 < coefficients(Scheme.THREE_STAGE).b1 < 0.5
        assert coefficients(Scheme.LEAPFROG).a1 is None


class TestStep:
    def test_leapfrog_hand_step(self):
        model = StdGaussianModel(1)
        out = step(Scheme.LEAPFROG, model, PhasePoint(np.array([1.0]), np.array([0.0])), 0.1)
        assert out.position[0] == pytest.approx(0.995, abs=1e-15)
        assert out.momentum[0] == pytest.approx(-0.09975, abs=1e-15)

    @pytest.mark.parametrize("kind", ALL_SCHEMES)
    def test_time_reversibility(self, kind):
        """step, flip, step, flip returns the start within 1e-12."""
        model = StudentTModel(ar1_precision(3, 0.7), dof=5.0)
        rng = np.random.default_rng(8)
        for _ in range(10):
            start = PhasePoint(rng.standard_normal(3), rng.standard_normal(3))
            forward = step(kind, model, start, 0.05)
            back = step(kind, model, forward.flip(), 0.05).flip()
            np.testing.assert_allclose(back.position, start.position, rtol=1e-12, atol=1e-13)
            np.testing.assert_allclose(back.momentum, start.momentum, rtol=1e-12, atol=1e-13)

    def test_two_stage_matches_propagation_matrix(self):
        model = StdGaussianModel(1)
        for eps in (0.01, 0.1, 0.4):
            out = step(Scheme.TWO_STAGE, model, PhasePoint(np.array([1.0]), np.array([0.0])), eps)
            column = propagation_matrix(Scheme.TWO_STAGE, eps).as_array() @ np.array([1.0, 0.0])
            np.testing.assert_allclose(
                [out.position[0], out.momentum[0]], column, rtol=1e-12, atol=1e-14
            )

    def test_requires_positive_eps(self):
        with pytest.raises(ValueError):
            step(Scheme.LEAPFROG, StdGaussianModel(1), PhasePoint([1.0], [0.0]), 0.0)


class TestIntegrate:
    def test_single_step_equivalence(self):
        model = StdGaussianModel(2)
        start = PhasePoint(np.array([0.3, -1.2]), np.array([0.5, 0.7]))
        lone = step(Scheme.THREE_STAGE, model, start, 0.2)
        chained, diverged = integrate(Scheme.THREE_STAGE, model, start, 0.2, 1)
        assert not diverged
        np.testing.assert_array_equal(chained.position, lone.position)
        np.testing.assert_array_equal(chained.momentum, lone.momentum)

    def test_leapfrog_quarter_turn(self):
        # at eps = sqrt(2) the one-step map has zero diagonal: (1,0) -> (0, -1/sqrt 2)
        model = StdGaussianModel(1)
        out, diverged = integrate(
            Scheme.LEAPFROG, model, PhasePoint(np.array([1.0]), np.array([0.0])), math.sqrt(2), 1
        )
        assert not diverged
        assert out.position[0] == pytest.approx(0.0, abs=1e-15)
        assert out.momentum[0] == pytest.approx(-1 / math.sqrt(2), rel=1e-14)

    def test_independent_proposal_decorrelates_position(self):
        """At the L=50 independence step size the final position depends only
        on the initial momentum."""
        point = independence_step_size(Scheme.LEAPFROG, 50)
        model = StdGaussianModel(1)
        rng = np.random.default_rng(21)
        starts = rng.standard_normal((10_000, 2))
        finals = np.empty(10_000)
        for i, (q0, p0) in enumerate(starts):
            out, _ = integrate(
                Scheme.LEAPFROG, model, PhasePoint(np.array([q0]), np.array([p0])), point.eps, 50
            )
            finals[i] = out.position[0]
        corr_q = np.corrcoef(finals, starts[:, 0])[0, 1]
        corr_p = np.corrcoef(finals, starts[:, 1])[0, 1]
        assert abs(corr_q) < 0.02
        assert abs(corr_p) > 0.99

    @pytest.mark.parametrize(
        "kind,expected",
        [
            (Scheme.LEAPFROG, 21),       # L + 1 with gradient reuse
            (Scheme.TWO_STAGE, 40),      # 2L
            (Scheme.NEW_TWO_STAGE, 40),  # 2L
            (Scheme.THREE_STAGE, 60),    # 3L
        ],
    )
    def test_gradient_accounting(self, kind, expected):
        model = StdGaussianModel(3)
        start = PhasePoint(np.ones(3), np.zeros(3))
        integrate(kind, model, start, 0.05, 20)
        assert model.gradient_evaluations == expected

    def test_bare_step_costs_two_for_leapfrog(self):
        model = StdGaussianModel(1)
        step(Scheme.LEAPFROG, model, PhasePoint([1.0], [0.0]), 0.1)
        assert model.gradient_evaluations == 2
        step(Scheme.LEAPFROG, model, PhasePoint([1.0], [0.0]), 0.1)
        assert model.gradient_evaluations == 4

    @pytest.mark.filterwarnings("ignore:overflow:RuntimeWarning")
    def test_divergence_flagged(self):
        model = QuarticWell(1)
        start = PhasePoint(np.array([3.0]), np.array([0.0]))
        out, diverged = integrate(Scheme.LEAPFROG, model, start, 5.0, 50)
        assert diverged
        assert not out.is_finite()

    @pytest.mark.parametrize("kind", ALL_SCHEMES)
    def test_energy_error_matches_closed_form(self, kind):
        """On the Gaussian target at the independence step size, the energy
        defect equals 1/2 sum[(1-s^2) q_i^2 + (1-r^2) p_i^2]."""
        point = independence_step_size(kind, 25)
        d = 3
        model = StdGaussianModel(d)
        rng = np.random.default_rng(31)
        for _ in range(5):
            q0, p0 = rng.standard_normal(d), rng.standard_normal(d)
            start = PhasePoint(q0, p0)
            h0 = 0.5 * (q0 @ q0 + p0 @ p0)
            out, _ = integrate(kind, model, start, point.eps, 25)
            h1 = 0.5 * (out.position @ out.position + out.momentum @ out.momentum)
            delta = h0 - h1
            closed = 0.5 * float(
                (1 - point.s**2) * (q0 @ q0) + (1 - point.r**2) * (p0 @ p0)
            )
            assert delta == pytest.approx(closed, abs=1e-8)


class TestStructuralProperties:
    @pytest.mark.parametrize("kind", ALL_SCHEMES)
    @pytest.mark.parametrize("eps", [0.01, 0.1])
    def test_volume_preservation(self, kind, eps):
        """Numerical Jacobian of one step on a nonlinear target has unit
        determinant within 1e-6."""
        model = StudentTModel(ar1_precision(2, 0.5), dof=5.0)
        rng = np.random.default_rng(13)
        h = 1e-5
        for _ in range(10):
            base = np.concatenate([rng.standard_normal(2), rng.standard_normal(2)])
            jacobian = np.empty((4, 4))
            for j in range(4):
                plus, minus = base.copy(), base.copy()
                plus[j] += h
                minus[j] -= h
                out_plus = step(kind, model, PhasePoint(plus[:2], plus[2:]), eps)
                out_minus = step(kind, model, PhasePoint(minus[:2], minus[2:]), eps)
                jacobian[:, j] = (
                    np.concatenate([out_plus.position, out_plus.momentum])
                    - np.concatenate([out_minus.position, out_minus.momentum])
                ) / (2 * h)
            assert abs(np.linalg.det(jacobian) - 1.0) < 1e-6

    @pytest.mark.parametrize("kind", ALL_SCHEMES)
    def test_second_order_convergence(self, kind):
        """Halving eps at fixed total time T=1 shrinks the endpoint error
        against the exact rotation by a factor 4 +- 10%."""
        model = StdGaussianModel(2)
        q0 = np.array([1.0, -0.5])
        p0 = np.array([0.25, 1.0])
        exact_q = q0 * math.cos(1.0) + p0 * math.sin(1.0)
        exact_p = -q0 * math.sin(1.0) + p0 * math.cos(1.0)

        def endpoint_error(eps):
            steps = round(1.0 / eps)
            out, _ = integrate(kind, model, PhasePoint(q0, p0), eps, steps)
            return np.linalg.norm(np.concatenate([out.position - exact_q, out.momentum - exact_p]))

        ratio = endpoint_error(0.02) / endpoint_error(0.01)
        assert 3.6 <= ratio <= 4.4

    @pytest.mark.parametrize("kind", ALL_SCHEMES)
    def test_reversibility_tight(self, kind):
        """flip(step(flip(step(x)))) = x within 1e-10 on every model family."""
        from splithmc import LogisticRegressionModel

        rng = np.random.default_rng(17)
        n = 12
        design = np.column_stack([np.ones(n), rng.standard_normal((n, 2))])
        labels = (rng.random(n) < 0.5).astype(float)
        targets = [
            StdGaussianModel(3),
            StudentTModel(ar1_precision(3, 0.9), dof=5.0),
            LogisticRegressionModel(design, labels),
        ]
        for model in targets:
            for _ in range(5):
                start = PhasePoint(rng.standard_normal(model.dim), rng.standard_normal(model.dim))
                forward = step(kind, model, start, 0.08)
                back = step(kind, model, forward.flip(), 0.08).flip()
                np.testing.assert_allclose(back.position, start.position, rtol=1e-10, atol=1e-12)
                np.testing.assert_allclose(back.momentum, start.momentum, rtol=1e-10, atol=1e-12)
