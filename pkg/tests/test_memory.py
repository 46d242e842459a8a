"""Linear memory theory, empirical estimators, and reservoir memory curves."""

import numpy as np
import pytest

from vestibular_rc.errors import (
    ConfigurationError,
    InsufficientDataError,
    InvalidInputError,
)
from vestibular_rc.memory import (
    LinearEsn,
    MemoryCurve,
    analytic_memory_curve,
    analytic_mc,
    analytic_mf_linear,
    linear_esn_run,
    memory_capacity,
    memory_curve_vestibular,
    memory_function,
    stochastic_input,
)
from vestibular_rc.reservoir import ReservoirConfig
from vestibular_rc.topology import (
    build_coupled,
    build_input_weights,
    build_uncoupled,
    match_spectrum_uncoupled,
)


def make_esn(n=5, rho=0.5, seed=0, coupled=False):
    rng = np.random.default_rng(seed)
    builder = build_coupled if coupled else build_uncoupled
    a = builder(n, 0.4, rho, rng) if coupled else builder(n, rho, rng)
    w_in = build_input_weights(n, 1, 1.0, rng)
    return LinearEsn(a=a, w_in=w_in), rng


def delay_line_states(x, n):
    """Rows r_i(t) = x(t - i), zero-padded before the record starts."""
    t = x.size
    out = np.zeros((n, t))
    for i in range(n):
        out[i, i:] = x[: t - i]
    return out


class TestStochasticInput:
    def test_reproducible_for_equal_seeds(self):
        a = stochastic_input(500, np.random.default_rng(7))
        b = stochastic_input(500, np.random.default_rng(7))
        assert np.array_equal(a.values, b.values)

    def test_different_seeds_differ(self):
        a = stochastic_input(500, np.random.default_rng(7))
        b = stochastic_input(500, np.random.default_rng(8))
        assert not np.array_equal(a.values, b.values)

    def test_shape_bounds_and_dt(self):
        u = stochastic_input(300, np.random.default_rng(0), dt=0.25)
        assert u.values.shape == (300, 1)
        assert u.dt == 0.25
        assert np.all(u.values >= 0.0) and np.all(u.values < 1.0)

    def test_moments_match_uniform(self):
        u = stochastic_input(100_000, np.random.default_rng(1)).values[:, 0]
        # 3 sigma of the sample mean of uniform [0, 1]
        assert abs(u.mean() - 0.5) < 3.0 * np.sqrt(1.0 / 12.0 / u.size)
        assert abs(u.var() - 1.0 / 12.0) < 5e-3

    def test_no_serial_correlation(self):
        u = stochastic_input(50_000, np.random.default_rng(2)).values[:, 0]
        c = u - u.mean()
        r1 = (c[1:] @ c[:-1]) / (c @ c)
        assert abs(r1) < 3.0 / np.sqrt(u.size)

    def test_rejects_empty(self):
        with pytest.raises(InvalidInputError):
            stochastic_input(0, np.random.default_rng(0))


class TestLinearEsn:
    def test_reports_size(self):
        esn, _ = make_esn(n=7)
        assert esn.n == 7

    def test_rejects_vector_input_weights(self):
        rng = np.random.default_rng(0)
        a = build_uncoupled(4, 0.5, rng)
        w_in = build_input_weights(4, 2, 1.0, rng)
        with pytest.raises(ConfigurationError):
            LinearEsn(a=a, w_in=w_in)

    def test_rejects_size_mismatch(self):
        rng = np.random.default_rng(0)
        a = build_uncoupled(4, 0.5, rng)
        w_in = build_input_weights(5, 1, 1.0, rng)
        with pytest.raises(ConfigurationError):
            LinearEsn(a=a, w_in=w_in)

    def test_rejects_unstable_spectrum(self):
        rng = np.random.default_rng(0)
        a = build_uncoupled(4, 1.05, rng)
        w_in = build_input_weights(4, 1, 1.0, rng)
        with pytest.raises(ConfigurationError):
            LinearEsn(a=a, w_in=w_in)


class TestLinearEsnRun:
    def test_zero_input_stays_at_zero(self):
        esn, _ = make_esn()
        states = linear_esn_run(esn, np.zeros(50))
        assert np.all(states == 0.0)

    def test_first_column_is_input_weight_response(self):
        esn, rng = make_esn()
        u = rng.uniform(0, 1, 20)
        states = linear_esn_run(esn, u)
        assert states[:, 0] == pytest.approx(esn.w_in.w_in[:, 0] * u[0],
                                             abs=1e-15)

    def test_scalar_node_unrolls_to_convolution(self):
        esn, rng = make_esn(n=1, rho=0.8, seed=3)
        lam = esn.a.eigenvalues[0]
        w = esn.w_in.w_in[0, 0]
        u = rng.uniform(0, 1, 40)
        states = linear_esn_run(esn, u)
        for t in (0, 5, 39):
            expect = sum(lam ** (t - i) * w * u[i] for i in range(t + 1))
            assert states[0, t] == pytest.approx(expect, abs=1e-12)

    def test_initial_state_propagates(self):
        esn, rng = make_esn(n=3, seed=5)
        u = rng.uniform(0, 1, 4)
        r0 = np.array([1.0, -2.0, 0.5])
        states = linear_esn_run(esn, u, r0=r0)
        expect = esn.a.a @ r0 + esn.w_in.w_in[:, 0] * u[0]
        assert states[:, 0] == pytest.approx(expect, abs=1e-14)

    def test_states_bounded_by_geometric_sum(self):
        esn, rng = make_esn(n=12, rho=0.8, seed=9, coupled=True)
        u = rng.uniform(0, 1, 2000)
        states = linear_esn_run(esn, u)
        norm_w = np.linalg.norm(esn.w_in.w_in[:, 0])
        bound = norm_w * np.abs(u).max() / (1.0 - 0.8)
        assert np.linalg.norm(states, axis=0).max() <= bound + 1e-9

    def test_rejects_wrong_initial_state_size(self):
        esn, _ = make_esn(n=3)
        with pytest.raises(InvalidInputError):
            linear_esn_run(esn, np.zeros(10), r0=np.zeros(4))

    def test_rejects_vector_series(self):
        esn, _ = make_esn()
        with pytest.raises(InvalidInputError):
            linear_esn_run(esn, np.zeros((10, 2)))


class TestMemoryFunctionEmpirical:
    def test_delay_line_reconstructs_stored_delays(self):
        # A perfect 5-tap delay line holds u(t)..u(t-4) exactly, so the
        # refined score is a step function of the delay.
        rng = np.random.default_rng(11)
        x = rng.uniform(0, 1, 450)
        states = delay_line_states(x, 5)
        for tau in range(5):
            assert memory_function(states, x, tau, t0=50) > 0.999
        for tau in (6, 8, 10):
            assert memory_function(states, x, tau, t0=50) < 0.05

    def test_zero_delay_feedthrough_is_perfect(self):
        rng = np.random.default_rng(12)
        x = rng.uniform(0, 1, 300)
        assert memory_function(x[None, :], x, 0, t0=20) > 1.0 - 1e-9

    def test_constant_states_score_zero(self):
        rng = np.random.default_rng(13)
        x = rng.uniform(0, 1, 300)
        assert memory_function(np.ones((3, 300)), x, 2, t0=20) == 0.0

    def test_constant_input_scores_zero(self):
        rng = np.random.default_rng(14)
        states = rng.normal(size=(3, 300))
        assert memory_function(states, np.ones(300), 2, t0=20) == 0.0

    def test_single_trial_tracks_analytic_curve(self):
        esn, rng = make_esn(n=5, rho=0.5, seed=5)
        u = stochastic_input(3200, rng)
        states = linear_esn_run(esn, u)
        emp = np.array([memory_function(states, u, tau, t0=200, t_window=3000)
                        for tau in range(21)])
        ana = analytic_memory_curve(esn.a.eigenvalues, 3000, 20).mf
        assert np.abs(emp - ana).max() < 0.03

    def test_standard_equals_alternative_at_zero_delay(self):
        esn, rng = make_esn(n=4, seed=21)
        u = stochastic_input(600, rng)
        states = linear_esn_run(esn, u)
        a = memory_function(states, u, 0, method="alternative")
        s = memory_function(states, u, 0, method="standard")
        assert abs(a - s) < 1e-14

    def test_all_methods_stay_in_unit_interval(self):
        esn, rng = make_esn(n=6, rho=0.8, seed=22)
        u = stochastic_input(800, rng)
        states = linear_esn_run(esn, u)
        for method in ("standard", "alternative", "refined"):
            for tau in range(11):
                v = memory_function(states, u, tau, method=method, t0=100)
                assert 0.0 <= v <= 1.0

    def test_rejects_unknown_method(self):
        with pytest.raises(InvalidInputError):
            memory_function(np.zeros((2, 50)), np.zeros(50), 0, method="median")

    def test_rejects_negative_delay(self):
        with pytest.raises(InvalidInputError):
            memory_function(np.zeros((2, 50)), np.zeros(50), -1, t0=10)

    def test_rejects_flat_states_array(self):
        with pytest.raises(InvalidInputError):
            memory_function(np.zeros(50), np.zeros(50), 0, t0=10)

    def test_rejects_length_mismatch(self):
        with pytest.raises(InvalidInputError):
            memory_function(np.zeros((2, 50)), np.zeros(60), 0, t0=10)

    def test_refined_rejects_delay_beyond_offset(self):
        with pytest.raises(InvalidInputError):
            memory_function(np.zeros((2, 100)), np.zeros(100), 30, t0=20)

    def test_refined_rejects_window_overrun(self):
        with pytest.raises(InsufficientDataError):
            memory_function(np.zeros((2, 100)), np.zeros(100), 0, t0=20,
                            t_window=90)

    def test_refined_rejects_offset_outside_record(self):
        with pytest.raises(InvalidInputError):
            memory_function(np.zeros((2, 100)), np.zeros(100), 0, t0=100)

    def test_alternative_rejects_exhausted_window(self):
        with pytest.raises(InsufficientDataError):
            memory_function(np.zeros((2, 50)), np.zeros(50), 49,
                            method="alternative")

    def test_standard_rejects_exhausted_overlap(self):
        with pytest.raises(InsufficientDataError):
            memory_function(np.zeros((2, 50)), np.zeros(50), 25,
                            method="standard")

    def test_rejects_negative_ridge(self):
        with pytest.raises(InvalidInputError):
            memory_function(np.zeros((2, 50)), np.zeros(50), 0, t0=10,
                            ridge_lambda=-1.0)


class TestMemoryCapacity:
    def test_sums_plain_sequences(self):
        assert memory_capacity([0.0, 0.0, 0.0]) == 0.0
        assert memory_capacity([1.0]) == 1.0
        assert memory_capacity([0.5, 0.25, 0.125]) == pytest.approx(0.875)

    def test_reads_curve_total(self):
        curve = MemoryCurve(mf=np.array([1.0, 0.5]), mc=1.5,
                            method="refined", t_window=100, t0=10)
        assert memory_capacity(curve) == 1.5

    def test_rejects_empty(self):
        with pytest.raises(InvalidInputError):
            memory_capacity([])


class TestMemoryCurveValidation:
    def good(self, **over):
        kw = dict(mf=np.array([1.0, 0.5]), mc=1.5, method="refined",
                  t_window=100, t0=10)
        kw.update(over)
        return MemoryCurve(**kw)

    def test_tau_max_counts_delays(self):
        assert self.good().tau_max == 1

    def test_rejects_negative_values(self):
        with pytest.raises(InvalidInputError):
            self.good(mf=np.array([-0.1, 0.5]), mc=0.4)

    def test_rejects_values_above_one(self):
        with pytest.raises(InvalidInputError):
            self.good(mf=np.array([1.2, 0.5]), mc=1.7)

    def test_rejects_inconsistent_total(self):
        with pytest.raises(InvalidInputError):
            self.good(mc=2.0)

    def test_rejects_unknown_method(self):
        with pytest.raises(InvalidInputError):
            self.good(method="spline")

    def test_rejects_empty_curve(self):
        with pytest.raises(InvalidInputError):
            self.good(mf=np.array([]), mc=0.0)

    def test_rejects_bad_window(self):
        with pytest.raises(InvalidInputError):
            self.good(t_window=0)
        with pytest.raises(InvalidInputError):
            self.good(t0=-1)


class TestAnalyticForms:
    def test_single_eigenvalue_closed_form(self):
        # [DERIVED] one node: M_F(tau) = lam^2tau (1 - lam^2)/(1 - lam^2T)
        for lam in (0.3, 0.6, 0.9, -0.8):
            for t_window in (50, 500):
                for tau in range(21):
                    expect = (lam ** (2 * tau) * (1.0 - lam ** 2)
                              / (1.0 - lam ** (2 * t_window)))
                    got = analytic_mf_linear([lam], t_window, tau)
                    assert got == pytest.approx(expect, abs=1e-10)

    def test_duplicate_eigenvalues_collapse_to_one_node(self):
        single = analytic_mf_linear([0.7], 200, 5)
        repeated = analytic_mf_linear([0.7] * 6, 200, 5)
        assert repeated == pytest.approx(single, abs=1e-10)

    def test_permutation_invariance(self):
        eigs = [0.9, -0.4, 0.2, 0.65]
        a = analytic_mf_linear(eigs, 300, 7)
        b = analytic_mf_linear(eigs[::-1], 300, 7)
        assert a == pytest.approx(b, abs=1e-12)

    def test_values_live_in_unit_interval(self):
        rng = np.random.default_rng(31)
        eigs = rng.uniform(-0.95, 0.95, 8)
        for tau in range(40):
            v = analytic_mf_linear(eigs, 400, tau)
            assert -1e-12 <= v <= 1.0 + 1e-9

    def test_empty_spectrum_has_no_memory(self):
        assert analytic_mf_linear([], 100, 3) == 0.0
        assert analytic_mc([], 100) == 0.0
        assert np.all(analytic_memory_curve([], 100, 10).mf == 0.0)

    def test_rejects_unit_circle_eigenvalues(self):
        with pytest.raises(InvalidInputError):
            analytic_mf_linear([0.5, 1.0], 100, 0)
        with pytest.raises(InvalidInputError):
            analytic_mc([-1.2], 100)

    def test_rejects_out_of_range_delay(self):
        with pytest.raises(InvalidInputError):
            analytic_mf_linear([0.5], 100, 100)
        with pytest.raises(InvalidInputError):
            analytic_mf_linear([0.5], 100, -1)

    def test_rejects_bad_window(self):
        with pytest.raises(InvalidInputError):
            analytic_mf_linear([0.5], 0, 0)
        with pytest.raises(InvalidInputError):
            analytic_memory_curve([0.5], 100, tau_max=100)

    def test_curve_matches_pointwise_evaluation(self):
        eigs = [-0.85, -0.4, 0.6]
        curve = analytic_memory_curve(eigs, 250, 30)
        for tau in range(31):
            assert curve.mf[tau] == pytest.approx(
                analytic_mf_linear(eigs, 250, tau), abs=1e-12)
        assert curve.method == "analytic"
        assert curve.mc == pytest.approx(curve.mf.sum())
        assert curve.t0 == 0

    def test_default_range_covers_the_window(self):
        curve = analytic_memory_curve([0.5, -0.3], 40)
        assert curve.tau_max == 39

    def test_full_range_sum_reaches_the_rank(self):
        # [DERIVED] summing M_F over every delay recovers rank(H)
        eigs3 = [-0.5, 0.2, 0.8]
        curve = analytic_memory_curve(eigs3, 60)
        assert curve.mc == pytest.approx(3.0, abs=1e-6)
        eigs10 = np.linspace(-0.9, -0.1, 10)
        curve10 = analytic_memory_curve(eigs10, 200)
        assert curve10.mc == pytest.approx(10.0, abs=1e-5)

    def test_capacity_counts_distinct_eigenvalues(self):
        assert analytic_mc(np.linspace(-0.9, -0.1, 10), 200) == pytest.approx(
            10.0, abs=1e-6)
        assert analytic_mc([0.6] * 8, 200) == pytest.approx(1.0, abs=1e-6)

    def test_capacity_bounded_by_size(self):
        rng = np.random.default_rng(32)
        eigs = rng.uniform(-0.9, 0.9, 6)
        assert analytic_mc(eigs, 150) <= 6.0 + 1e-9

    def test_spectrum_matched_topologies_share_the_curve(self):
        rng = np.random.default_rng(33)
        coupled = build_coupled(12, 0.4, 0.7, rng)
        matched = match_spectrum_uncoupled(coupled)
        assert np.abs(coupled.eigenvalues - matched.eigenvalues).max() < 1e-12
        a = analytic_memory_curve(coupled.eigenvalues, 300, 40).mf
        b = analytic_memory_curve(matched.eigenvalues, 300, 40).mf
        assert np.abs(a - b).max() < 1e-9


class TestEmpiricalMatchesAnalytic:
    def test_trial_mean_converges_to_theory(self):
        # 30 trials at a long window; the paired signed deviation
        # averages out trial noise around the closed form.
        n, t_window, t0 = 20, 4000, 200
        dev = np.zeros(51)
        for trial in range(30):
            rng = np.random.default_rng(100 + trial)
            a = build_uncoupled(n, 0.9, rng)
            w_in = build_input_weights(n, 1, 1.0, rng)
            u = stochastic_input(t0 + t_window, rng)
            states = linear_esn_run(LinearEsn(a=a, w_in=w_in), u)
            emp = np.array([memory_function(states, u, tau, t0=t0,
                                            t_window=t_window)
                            for tau in range(51)])
            dev += emp - analytic_memory_curve(a.eigenvalues, t_window, 50).mf
        assert np.abs(dev / 30).max() < 0.05

    def test_coupled_matches_its_diagonal_twin(self):
        # Same eigenvalues and same input realization: the empirical
        # curves agree even with independent input weights.
        rng = np.random.default_rng(77)
        coupled = build_coupled(8, 0.4, 0.9, rng)
        matched = match_spectrum_uncoupled(coupled)
        w_c = build_input_weights(8, 1, 1.0, rng)
        w_m = build_input_weights(8, 1, 1.0, rng)
        u = stochastic_input(1200, rng)
        s_c = linear_esn_run(LinearEsn(a=coupled, w_in=w_c), u)
        s_m = linear_esn_run(LinearEsn(a=matched, w_in=w_m), u)
        for tau in range(0, 31, 5):
            a = memory_function(s_c, u, tau, t0=100, t_window=1000)
            b = memory_function(s_m, u, tau, t0=100, t_window=1000)
            assert abs(a - b) < 0.05


@pytest.fixture(scope="module")
def small_curve():
    rng = np.random.default_rng(3)
    a = build_coupled(10, 0.4, 0.8, rng)
    w_in = build_input_weights(10, 1, 1.0, rng)
    cfg = ReservoirConfig(n=10, a=a, w_in=w_in, time_constant=6.0)
    u = stochastic_input(700, rng, dt=0.1)
    return memory_curve_vestibular(cfg, u, tau_max=100)


class TestVestibularMemoryCurve:
    def test_curve_is_well_formed(self, small_curve):
        assert small_curve.method == "refined"
        assert small_curve.mf.size == 101
        assert small_curve.mc == pytest.approx(small_curve.mf.sum(), abs=1e-9)
        assert np.all(small_curve.mf >= 0.0)
        assert np.all(small_curve.mf <= 1.0)

    def test_recent_inputs_dominate(self, small_curve):
        assert small_curve.mf[0] > 0.9
        assert small_curve.mf[1] > 0.9
        assert small_curve.mf[20:].mean() < 0.05

    def test_memory_fades_monotonically_when_smoothed(self, small_curve):
        smooth = np.convolve(small_curve.mf, np.ones(5) / 5, mode="valid")
        assert np.max(np.diff(smooth)) < 0.02

    def test_reproducible_for_equal_seeds(self, small_curve):
        rng = np.random.default_rng(3)
        a = build_coupled(10, 0.4, 0.8, rng)
        w_in = build_input_weights(10, 1, 1.0, rng)
        cfg = ReservoirConfig(n=10, a=a, w_in=w_in, time_constant=6.0)
        u = stochastic_input(700, rng, dt=0.1)
        again = memory_curve_vestibular(cfg, u, tau_max=100)
        assert np.array_equal(again.mf, small_curve.mf)

    def test_rejects_vector_input_config(self):
        rng = np.random.default_rng(4)
        a = build_coupled(6, 0.4, 0.8, rng)
        w_in = build_input_weights(6, 3, 1.0, rng)
        cfg = ReservoirConfig(n=6, a=a, w_in=w_in)
        with pytest.raises(InvalidInputError):
            memory_curve_vestibular(cfg, stochastic_input(700, rng))

    def test_rejects_short_drive(self):
        rng = np.random.default_rng(5)
        a = build_coupled(6, 0.4, 0.8, rng)
        w_in = build_input_weights(6, 1, 1.0, rng)
        cfg = ReservoirConfig(n=6, a=a, w_in=w_in)
        with pytest.raises(InsufficientDataError):
            memory_curve_vestibular(cfg, stochastic_input(400, rng))

    def test_rejects_delays_beyond_offset(self):
        rng = np.random.default_rng(6)
        a = build_coupled(6, 0.4, 0.8, rng)
        w_in = build_input_weights(6, 1, 1.0, rng)
        cfg = ReservoirConfig(n=6, a=a, w_in=w_in)
        with pytest.raises(InvalidInputError):
            memory_curve_vestibular(cfg, stochastic_input(700, rng),
                                    tau_max=300)
