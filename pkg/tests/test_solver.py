import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from viscodecay.domain import DomainSpec, laplacian
from viscodecay.kernels import ExponentialKernel, PowerLawKernel, ZeroKernel
from viscodecay.solver import (
    BlowUpSignal,
    SimConfig,
    damping_solve,
    damping_solve_field,
    initial_state,
    memory_term,
    run,
    step,
)
from viscodecay.varexp import ExponentField


def sine_data(dom, amplitude=1.0, mode=1):
    x = dom.axes()[0]
    u = amplitude * np.sin(mode * np.pi * x / dom.lengths[0])
    u[0] = u[-1] = 0.0
    return u


def const_fields(dom, m=2.0, p=4.0):
    return ExponentField.constant(m, dom), ExponentField.constant(p, dom)


class TestDampingSolve:
    def test_linear_case(self):
        assert damping_solve(3.0, 0.5, 2.0, 2.0) == pytest.approx(3.0 / (1.0 + 1.0))

    def test_cubic_exact_root(self):
        assert damping_solve(2.0, 1.0, 1.0, 3.0) == pytest.approx(1.0, abs=1e-12)

    def test_odd_symmetry(self):
        assert damping_solve(-2.0, 1.0, 1.0, 3.0) == pytest.approx(-1.0, abs=1e-12)

    def test_zero_damping_identity(self):
        assert damping_solve(1.23, 0.1, 0.0, 3.0) == 1.23

    @given(
        r=st.floats(-1e6, 1e6),
        dt=st.floats(1e-5, 1.0),
        a=st.floats(0.0, 10.0),
        m=st.floats(2.0, 6.0),
    )
    def test_residual_bound(self, r, dt, a, m):
        v = damping_solve(r, dt, a, m)
        residual = v + dt * a * abs(v) ** (m - 2.0) * v - r
        assert abs(residual) <= 1e-12 * max(1.0, abs(r))

    @given(
        r1=st.floats(-100.0, 100.0),
        gap=st.floats(1e-6, 50.0),
        dt=st.floats(1e-4, 1.0),
        a=st.floats(0.0, 5.0),
        m=st.floats(2.0, 5.0),
    )
    def test_strictly_monotone(self, r1, gap, dt, a, m):
        v1 = damping_solve(r1, dt, a, m)
        v2 = damping_solve(r1 + gap, dt, a, m)
        assert v1 < v2

    def test_field_version_mixed_exponents(self):
        r = np.array([2.0, -2.0, 0.0, 5.0])
        m = np.array([3.0, 3.0, 2.5, 2.0])
        v = damping_solve_field(r, 1.0, 1.0, m)
        assert v[0] == pytest.approx(1.0)
        assert v[1] == pytest.approx(-1.0)
        assert v[2] == 0.0
        assert v[3] == pytest.approx(2.5)


class TestMemoryTerm:
    def test_zero_at_start(self, unit_interval):
        u0 = sine_data(unit_interval)
        state = initial_state(u0, np.zeros(101), unit_interval)
        mem = memory_term(state, ExponentialKernel(0.5, 1.0), unit_interval)
        assert np.all(mem == 0.0)

    def test_zero_kernel(self, unit_interval):
        u0 = sine_data(unit_interval)
        state = initial_state(u0, np.zeros(101), unit_interval, capacity=200)
        for j in range(1, 100):
            state.history.append(0.01 * j, u0)
        state.t = 0.99
        assert np.all(memory_term(state, ZeroKernel(), unit_interval) == 0.0)

    def test_constant_history_analytic(self, unit_interval):
        # u frozen in time, g = exp(-t): the convolution is (1 - e^-t) * lap(u)
        u0 = sine_data(unit_interval)
        dt = 5e-4
        state = initial_state(u0, np.zeros(101), unit_interval, capacity=2100)
        for j in range(1, 2001):
            state.history.append(j * dt, u0)
        state.t = 1.0
        state.u = u0
        mem = memory_term(state, ExponentialKernel(1.0, 1.0), unit_interval)
        expected = (1.0 - math.exp(-1.0)) * laplacian(u0, unit_interval)
        scale = np.abs(expected).max()
        assert np.abs(mem - expected).max() <= 1e-6 * scale  # O(dt^2) quadrature

    def test_history_gap_detected(self, unit_interval):
        u0 = sine_data(unit_interval)
        state = initial_state(u0, np.zeros(101), unit_interval, capacity=10)
        state.history.gap_limit = 0.01
        state.history.append(0.5, u0)  # gap of 0.5 >> limit
        state.t = 0.5
        state.u = u0
        with pytest.raises(RuntimeError, match="gap"):
            memory_term(state, ExponentialKernel(0.5, 1.0), unit_interval)


class TestStep:
    def test_zero_equilibrium(self, unit_interval):
        m, p = const_fields(unit_interval)
        cfg = SimConfig(a=1.0, b=1.0, dt=0.004, t_end=0.4)
        state = initial_state(np.zeros(101), np.zeros(101), unit_interval, capacity=102)
        kernel = ExponentialKernel(0.5, 1.0)
        for _ in range(100):
            state = step(state, cfg, kernel, m, p, unit_interval)
        assert np.all(state.u == 0.0)
        assert np.all(state.v == 0.0)

    def test_standing_wave(self):
        # a = b = 0, g = 0: u = sin(pi x) cos(pi t)
        dom = DomainSpec(1, (1.0,), (201,))
        m, p = const_fields(dom)
        cfg = SimConfig(a=0.0, b=0.0, dt=1e-3, t_end=1.0)
        state = initial_state(sine_data(dom), np.zeros(201), dom, capacity=cfg.n_steps + 2)
        for _ in range(cfg.n_steps):
            state = step(state, cfg, ZeroKernel(), m, p, dom)
        exact = sine_data(dom) * math.cos(math.pi * 1.0)
        assert np.abs(state.u - exact).max() <= 5e-3

    def test_scalar_ode_oracle(self):
        # single interior node: u'' = -8u - |u'| u' (m = 3); reference from an
        # adaptive high-accuracy integrator
        from scipy.integrate import solve_ivp

        dom = DomainSpec(1, (1.0,), (3,))
        m = ExponentField.constant(3.0, dom)
        p = ExponentField.constant(4.0, dom)
        cfg = SimConfig(a=1.0, b=0.0, dt=2.5e-5, t_end=1.0)
        state = initial_state(np.array([0.0, 1.0, 0.0]), np.zeros(3), dom, cfg.n_steps + 2)
        for _ in range(cfg.n_steps):
            state = step(state, cfg, ZeroKernel(), m, p, dom)
        sol = solve_ivp(
            lambda t, y: [y[1], -8.0 * y[0] - abs(y[1]) * y[1]],
            (0.0, 1.0),
            [1.0, 0.0],
            rtol=1e-11,
            atol=1e-13,
        )
        assert abs(state.u[1] - sol.y[0, -1]) <= 1e-4 * abs(sol.y[0, -1])

    def test_blowup_signal_carries_time(self, unit_interval):
        m, p = const_fields(unit_interval)
        cfg = SimConfig(a=0.0, b=50.0, dt=0.004, t_end=4.0, blowup_threshold=10.0)
        state = initial_state(sine_data(unit_interval, 2.0), np.zeros(101), unit_interval, 1100)
        with pytest.raises(BlowUpSignal) as info:
            for _ in range(cfg.n_steps):
                state = step(state, cfg, ZeroKernel(), m, p, unit_interval)
        assert 0.0 < info.value.t <= 4.0


class TestRun:
    def test_zero_data_completes_flat(self, unit_interval):
        m, p = const_fields(unit_interval)
        cfg = SimConfig(a=1.0, b=1.0, dt=0.004, t_end=1.0, output_stride=10)
        traj = run(cfg, ExponentialKernel(0.5, 1.0), m, p, unit_interval,
                   np.zeros(101), np.zeros(101))
        assert traj.outcome == "completed"
        assert np.all(traj.energies == 0.0)
        assert np.all(traj.lambda_t == 0.0)

    def test_conservation_undamped(self):
        dom = DomainSpec(1, (1.0,), (201,))
        m, p = const_fields(dom)
        cfg = SimConfig(a=0.0, b=0.0, dt=1e-3, t_end=2.0, output_stride=50)
        traj = run(cfg, ZeroKernel(), m, p, dom, sine_data(dom), np.zeros(201))
        E = traj.energies
        assert np.abs(E - E[0]).max() <= 1e-4 * E[0]

    def test_stable_run_monotone(self, unit_interval):
        m, p = const_fields(unit_interval)
        cfg = SimConfig(a=1.0, b=1.0, dt=0.004, t_end=4.0, output_stride=10)
        traj = run(cfg, ExponentialKernel(0.5, 1.0), m, p, unit_interval,
                   sine_data(unit_interval, 0.2), np.zeros(101))
        assert traj.outcome == "completed"
        assert (np.diff(traj.energies) <= 1e-10).all()

    def test_blowup_outcome(self, unit_interval):
        m, p = const_fields(unit_interval)
        cfg = SimConfig(a=1.0, b=20.0, dt=0.004, t_end=10.0, output_stride=10)
        traj = run(cfg, ExponentialKernel(0.5, 1.0), m, p, unit_interval,
                   sine_data(unit_interval, 1.2), np.zeros(101))
        assert traj.outcome == "blew_up"
        assert traj.blowup_time is not None and traj.blowup_time < 10.0

    def test_recursion_matches_full_quadrature(self, unit_interval):
        m, p = const_fields(unit_interval)
        u0 = sine_data(unit_interval, 0.2)
        trajs = {}
        for mode in ("full", "recursion"):
            cfg = SimConfig(a=1.0, b=1.0, dt=0.004, t_end=2.0, output_stride=5,
                            memory_mode=mode)
            trajs[mode] = run(cfg, ExponentialKernel(0.5, 1.0), m, p, unit_interval,
                              u0, np.zeros(101))
        e_full = trajs["full"].energies
        e_rec = trajs["recursion"].energies
        assert np.abs(e_full - e_rec).max() <= 1e-6 * np.abs(e_full).max()

    def test_recursion_rejected_for_powerlaw(self, unit_interval):
        with pytest.raises(ValueError, match="recursion"):
            m, p = const_fields(unit_interval)
            cfg = SimConfig(a=1.0, b=1.0, dt=0.004, t_end=1.0, memory_mode="recursion")
            run(cfg, PowerLawKernel(0.5, 2.0 * math.sqrt(2.0), 1.5), m, p,
                unit_interval, sine_data(unit_interval, 0.2), np.zeros(101))

    def test_history_stride(self, unit_interval):
        m, p = const_fields(unit_interval)
        u0 = sine_data(unit_interval, 0.2)
        cfg1 = SimConfig(a=1.0, b=1.0, dt=0.002, t_end=2.0, output_stride=100,
                         memory_mode="full")
        cfg4 = SimConfig(a=1.0, b=1.0, dt=0.002, t_end=2.0, output_stride=100,
                         history_stride=4, memory_mode="full")
        e1 = run(cfg1, ExponentialKernel(0.5, 1.0), m, p, unit_interval, u0,
                 np.zeros(101)).energies
        e4 = run(cfg4, ExponentialKernel(0.5, 1.0), m, p, unit_interval, u0,
                 np.zeros(101)).energies
        # coarser memory quadrature, same trajectory to O(stride^2 dt^2)
        assert np.abs(e1 - e4).max() <= 1e-4 * np.abs(e1).max()

    def test_cfl_guard(self, unit_interval):
        m, p = const_fields(unit_interval)
        cfg = SimConfig(a=0.0, b=0.0, dt=0.02, t_end=1.0)  # h = 0.01 -> limit 0.005
        with pytest.raises(ValueError, match="CFL"):
            run(cfg, ZeroKernel(), m, p, unit_interval, np.zeros(101), np.zeros(101))

    def test_boundary_violating_data_rejected(self, unit_interval):
        m, p = const_fields(unit_interval)
        cfg = SimConfig(a=0.0, b=0.0, dt=0.004, t_end=1.0)
        bad = np.ones(101)
        with pytest.raises(ValueError, match="boundary"):
            run(cfg, ZeroKernel(), m, p, unit_interval, bad, np.zeros(101))


class TestConvergenceOrders:
    def _final_state(self, dom, cfg, kernel, m, p, u0):
        state = initial_state(u0, np.zeros(u0.shape[0]), dom, cfg.n_steps + 2)
        for _ in range(cfg.n_steps):
            state = step(state, cfg, kernel, m, p, dom)
        return state

    def test_second_order_in_space(self):
        errs = []
        for n in (51, 101, 201):
            dom = DomainSpec(1, (1.0,), (n,))
            m, p = const_fields(dom)
            cfg = SimConfig(a=0.0, b=0.0, dt=1e-4, t_end=0.4)
            state = self._final_state(dom, cfg, ZeroKernel(), m, p, sine_data(dom))
            exact = sine_data(dom) * math.cos(math.pi * 0.4)
            errs.append(np.abs(state.u - exact).max())
        orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
        assert min(orders) >= 1.8

    def test_first_order_in_time_with_damping(self):
        # semi-discrete eigenmode of the damped linear problem solved exactly in
        # time isolates the dt error of the splitting
        n = 51
        dom = DomainSpec(1, (1.0,), (n,))
        h = dom.h[0]
        om_h = math.sqrt(4.0 / h**2 * math.sin(math.pi * h / 2.0) ** 2)
        a = 1.0
        om_t = math.sqrt(om_h**2 - 0.25 * a * a)
        amp = lambda t: math.exp(-0.5 * a * t) * (
            math.cos(om_t * t) + 0.5 * a / om_t * math.sin(om_t * t)
        )
        m, p = const_fields(dom)
        u0 = sine_data(dom)
        errs = []
        for dt in (4e-3, 2e-3, 1e-3):
            cfg = SimConfig(a=a, b=0.0, dt=dt, t_end=1.0)
            state = self._final_state(dom, cfg, ZeroKernel(), m, p, u0)
            errs.append(np.abs(state.u - u0 * amp(1.0)).max())
        orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
        assert min(orders) >= 0.9
