import numpy as np
import pytest

from chemostokes import linearized as lin
from chemostokes import noise as nz
from chemostokes import spectral as sp


def make_params(eigen, seed=0, **kw):
    p = lin.ModelParams(noise=nz.NoiseConfig(K=eigen.K, master_seed=seed), **kw)
    return p.resolve(eigen)


def zero_state(eigen):
    K = eigen.K
    return lin.SystemState(np.zeros(K), np.zeros(K), np.zeros((2, K)))


def small_random_state(eigen, rng, amp=0.02):
    K = eigen.K
    dec = (1.0 + eigen.lam) ** -1
    n = amp * dec * rng.standard_normal(K)
    n[0] = 0.15 * np.sqrt(eigen.grid.area)
    c = amp * dec * rng.standard_normal(K)
    psi = amp * dec * rng.standard_normal(K)
    u = np.stack([-eigen.dy(psi), eigen.dx(psi)])
    return lin.SystemState(n, c, u)


class TestParams:
    def test_q_constraint(self, small_basis):
        with pytest.raises(ValueError):
            lin.ModelParams(q=3.0)

    def test_derived_constants(self, small_basis):
        p = make_params(small_basis)
        lam = small_basis.lam[small_basis.lam > 0]
        assert p.theta == pytest.approx(0.5 * np.sum(lam ** -2.5))
        assert p.alpha == pytest.approx(5.0 - 0.5 * 2.5 ** 2)

    def test_noise_off_reverts_to_stratonovich(self, small_basis):
        p = make_params(small_basis).noise_off(small_basis)
        assert p.theta == 0.0 and p.alpha == p.zeta
        assert p.noise.amp1 == p.noise.amp2 == p.noise.amp3 == 0.0


class TestStepU:
    def test_single_mode_integrating_factor(self, small_basis):
        e = small_basis
        p = make_params(e).noise_off(e)
        i = int(np.nonzero(e.lam == 2.0)[0][0])
        psi = np.zeros(e.K)
        psi[i] = 1.0
        u0 = np.stack([-e.dy(psi), e.dx(psi)])
        dt = 1e-3
        out = lin.step_u(u0, np.zeros(e.K), e, p, np.zeros((2, e.K)), dt)
        assert np.allclose(out, np.exp(-2.0 * p.r_u * dt) * u0, atol=1e-15)

    def test_stationary_state_of_constant_forcing(self, small_basis, rng):
        # direct linear solve oracle: r_u A u = P(xi * Phi)
        e = small_basis
        p = make_params(e).noise_off(e)
        # amplitude keeps the leftover e^-10 transient below the tolerance
        xi = 1e-4 * (1.0 + e.lam) ** -1 * rng.standard_normal(e.K)
        steps = int(10.0 / (p.r_u * 1.0) / 1e-2)
        noise = nz.sample_path(p.noise, steps, 1e-2, 0)
        traj = lin.solve_linearized(np.tile(xi, (steps + 1, 1)), noise, e, p,
                                    1e9, zero_state(e))
        from chemostokes.linearized import Stepper
        force = Stepper(e, p, 1e-2).body_force(xi)
        lam = e.lam
        u_star = np.where(lam > 0, force / np.where(lam > 0, p.r_u * lam, 1.0), 0.0)
        # residual of the stationary equation at the final time
        resid = p.r_u * lam * (traj.u[-1] - u_star)
        live = lam > 0
        assert np.abs(resid[:, live]).max() <= 1e-8

    def test_ou_variance_analytic(self, small_basis):
        e = small_basis
        p = make_params(e)
        T, steps, dt = 0.4, 400, 1e-3
        lam = e.lam
        safe = np.where(lam > 0, lam, 1.0)
        exact = float(np.sum(np.where(
            lam > 0,
            safe ** -p.noise.gamma3 * (1 - np.exp(-2 * p.r_u * lam * T))
            / (2 * p.r_u * safe), 0.0)))
        vals = []
        xi = np.zeros((steps + 1, e.K))
        for pid in range(64):
            noise = nz.sample_path(p.noise, steps, dt, pid)
            traj = lin.solve_linearized(xi, noise, e, p, 1e9, zero_state(e))
            vals.append(float(np.sum(traj.u[-1] ** 2)))
        vals = np.array(vals)
        se = vals.std(ddof=1) / np.sqrt(vals.size)
        assert abs(vals.mean() - exact) <= 3 * se


class TestStepC:
    def test_exact_decay_rate(self, small_basis):
        e = small_basis
        p = make_params(e).noise_off(e)
        i = int(np.nonzero(e.lam == 1.0)[0][0])
        c0 = np.zeros(e.K)
        c0[i] = 1.0
        dt = 1e-3
        out = lin.step_c(c0, np.zeros(e.K), np.zeros((2, e.K)), 1.0, e, p,
                         np.zeros(e.K), dt)
        assert out[i] == pytest.approx(np.exp(-(p.r_c + p.alpha) * dt))

    def test_constant_mode_saturates_at_beta_over_alpha(self, small_basis):
        e = small_basis
        p = make_params(e).noise_off(e)
        steps, dt = 4000, 2e-3
        xi = np.zeros((steps + 1, e.K))
        xi[:, 0] = np.sqrt(e.grid.area)          # field == 1
        noise = nz.sample_path(p.noise, steps, dt, 0)
        traj = lin.solve_linearized(xi, noise, e, p, 1e9, zero_state(e))
        c_inf = traj.c[-1][0] / np.sqrt(e.grid.area)
        assert c_inf == pytest.approx(p.beta / p.alpha, rel=1e-6)

    def test_cutoff_zero_matches_zero_velocity_bitwise(self, small_basis, rng):
        e = small_basis
        p = make_params(e)
        c0 = 0.1 * rng.standard_normal(e.K)
        xi = 0.1 * rng.standard_normal(e.K)
        big_u = sp.helmholtz_project_coeffs(5.0 * rng.standard_normal((2, e.K)), e)
        dW = rng.standard_normal(e.K) * np.sqrt(1e-3)
        with_u = lin.step_c(c0, xi, big_u, 0.0, e, p, dW, 1e-3)
        without = lin.step_c(c0, xi, np.zeros((2, e.K)), 0.0, e, p, dW, 1e-3)
        assert np.array_equal(with_u, without)

    def test_cutoff_range_validated(self, small_basis):
        e = small_basis
        p = make_params(e)
        with pytest.raises(ValueError):
            lin.step_c(np.zeros(e.K), np.zeros(e.K), np.zeros((2, e.K)), 1.5,
                       e, p, np.zeros(e.K), 1e-3)


class TestStepN:
    def test_constant_state_is_steady(self, small_basis):
        e = small_basis
        p = make_params(e).noise_off(e)
        n0 = np.zeros(e.K)
        n0[0] = 0.3 * np.sqrt(e.grid.area)
        steps = 40
        noise = nz.sample_path(p.noise, steps, 1e-3, 0)
        traj = lin.solve_linearized(np.zeros((steps + 1, e.K)), noise, e, p,
                                    1e9, lin.SystemState(n0, np.zeros(e.K),
                                                         np.zeros((2, e.K))))
        assert np.abs(traj.n[-1] - n0).max() <= 1e-15

    def test_mass_conserved_per_step(self, small_basis, rng):
        e = small_basis
        p = make_params(e).noise_off(e)
        st = small_random_state(e, rng)
        steps = 60
        noise = nz.sample_path(p.noise, steps, 1e-3, 0)
        traj = lin.solve_linearized(np.zeros((steps + 1, e.K)), noise, e, p,
                                    1e9, st)
        mass = np.sqrt(e.grid.area) * traj.n[:, 0]
        assert np.abs(np.diff(mass)).max() <= 1e-12

    def test_porous_energy_dissipates(self, small_basis, rng):
        e = small_basis
        p = make_params(e).noise_off(e)
        st = small_random_state(e, rng, amp=0.05)
        st.c[:] = 0.0
        st.u[:] = 0.0
        steps = 100
        dt = min(1e-3, 0.5 * lin.stability_dt(st.n, e, p))
        noise = nz.sample_path(p.noise, steps, dt, 0)
        traj = lin.solve_linearized(np.zeros((steps + 1, e.K)), noise, e, p,
                                    1e9, st)
        g = e.grid
        cell = g.area / (g.nx * g.ny)
        vals = e.to_values(traj.n)
        energy = np.sum(np.abs(vals) ** (p.q + 1.0), axis=(1, 2)) * cell
        assert np.all(np.diff(energy) <= 1e-14)

    def test_blow_up_names_step(self, small_basis):
        e = small_basis
        p = make_params(e).noise_off(e)
        n0 = np.zeros(e.K)
        n0[0] = 40.0 * np.sqrt(e.grid.area)     # far beyond the dt budget
        steps = 3
        noise = nz.sample_path(p.noise, steps, 1e-3, 0)
        with pytest.raises(lin.BlowUpError, match="step 0"):
            lin.solve_linearized(np.zeros((steps + 1, e.K)), noise, e, p, 1e9,
                                 lin.SystemState(n0, np.zeros(e.K),
                                                 np.zeros((2, e.K))))


class TestStabilityDt:
    def test_zero_density_unconstrained(self, small_basis):
        p = make_params(small_basis)
        assert lin.stability_dt(np.zeros(small_basis.K), small_basis, p) == np.inf

    def test_power_law_scaling(self, small_basis):
        e = small_basis
        p = make_params(e)
        n = np.zeros(e.K)
        n[0] = 0.5 * np.sqrt(e.grid.area)
        one = lin.stability_dt(n, e, p)
        two = lin.stability_dt(2.0 * n, e, p)
        assert one / two == pytest.approx(16.0, rel=1e-10)

    def test_grid_scaling_via_lambda_max(self):
        p32 = sp.build_eigenbasis(sp.Grid(32, 32))
        p64 = sp.build_eigenbasis(sp.Grid(64, 64))
        params32 = make_params(p32)
        params64 = make_params(p64)
        n32 = np.zeros(p32.K)
        n32[0] = 0.5 * np.sqrt(p32.grid.area)
        n64 = np.zeros(p64.K)
        n64[0] = 0.5 * np.sqrt(p64.grid.area)
        b32 = lin.stability_dt(n32, p32, params32)
        b64 = lin.stability_dt(n64, p64, params64)
        assert b64 / b32 == pytest.approx(p32.lam[-1] / p64.lam[-1], rel=1e-10)


class TestSolveLinearized:
    def test_zero_everything_stays_zero(self, small_basis):
        e = small_basis
        p = make_params(e).noise_off(e)
        steps = 20
        noise = nz.sample_path(p.noise, steps, 1e-3, 0)
        traj = lin.solve_linearized(np.zeros((steps + 1, e.K)), noise, e, p,
                                    1e9, zero_state(e))
        assert np.abs(traj.n).max() == 0.0
        assert np.abs(traj.c).max() == 0.0
        assert np.abs(traj.u).max() == 0.0

    def test_split_structure_ignores_n0(self, small_basis, rng):
        e = small_basis
        p = make_params(e)
        steps = 30
        noise = nz.sample_path(p.noise, steps, 1e-3, 1)
        xi = 0.02 * rng.standard_normal((steps + 1, e.K))
        stA = small_random_state(e, rng)
        stB = lin.SystemState(small_random_state(e, rng).n, stA.c.copy(),
                              stA.u.copy())
        tA = lin.solve_linearized(xi, noise, e, p, 4.0, stA)
        tB = lin.solve_linearized(xi, noise, e, p, 4.0, stB)
        assert np.array_equal(tA.c, tB.c)
        assert np.array_equal(tA.u, tB.u)

    def test_linear_regime_closed_form(self, small_basis, rng):
        e = small_basis
        p = make_params(e).noise_off(e)
        p.chi = 0.0
        p.delta_n = p.delta_c = 0.0
        p.theta = 2.0
        steps, dt = 1000, 1e-4
        amp = 1e-2
        dec = (1.0 + e.lam) ** -1
        n0 = amp * dec * rng.standard_normal(e.K)
        c0 = amp * dec * rng.standard_normal(e.K)
        psi = amp * dec * rng.standard_normal(e.K)
        u0 = np.stack([-e.dy(psi), e.dx(psi)])
        xi_c = amp * dec * rng.standard_normal(e.K)
        noise = nz.sample_path(p.noise, steps, dt, 0)
        traj = lin.solve_linearized(np.tile(xi_c, (steps + 1, 1)), noise, e, p,
                                    1e9, lin.SystemState(n0, c0, u0))
        T = steps * dt
        lam = e.lam
        from chemostokes.linearized import Stepper
        force = Stepper(e, p, dt).body_force(xi_c)
        eaT = np.exp(-p.r_u * lam * T)
        duh = np.where(lam > 0, (1 - eaT) / np.where(lam > 0, p.r_u * lam, 1.0), T)
        u_exact = eaT * u0 + duh * force
        a_c = p.r_c * lam + p.alpha
        c_exact = np.exp(-a_c * T) * c0 + (1 - np.exp(-a_c * T)) / a_c * p.beta * xi_c
        n_exact = n0 + p.theta * xi_c * T
        scale = max(np.abs(u_exact).max(), np.abs(c_exact).max(),
                    np.abs(n_exact).max())
        assert np.abs(traj.u[-1] - u_exact).max() <= 1e-6 * scale
        assert np.abs(traj.c[-1] - c_exact).max() <= 1e-6 * scale
        assert np.abs(traj.n[-1] - n_exact).max() <= 1e-6 * scale

    def test_mass_law_with_growth(self, small_basis):
        # self-fed coupled run: d/dt int n = theta int n
        from chemostokes.glue import run_coupled
        e = small_basis
        p = make_params(e).noise_off(e)
        p.theta = 1.3
        T, dt = 0.2, 1e-4
        steps = int(T / dt)
        n0 = np.zeros(e.K)
        n0[0] = 0.2 * np.sqrt(e.grid.area)
        st = lin.SystemState(n0, np.zeros(e.K), np.zeros((2, e.K)))
        noise = nz.sample_path(p.noise, steps, dt, 0)
        traj, _tau, _b = run_coupled(st, e, p, noise, 1e9, stop=False)
        ratio = traj.n[-1][0] / traj.n[0][0]
        assert abs(ratio - np.exp(p.theta * T)) / np.exp(p.theta * T) <= 1e-4

    def test_advection_antisymmetry(self, small_basis, rng):
        e = small_basis
        p = make_params(e)
        st = lin.Stepper(e, p, 1e-3)
        for _ in range(10):
            u = sp.helmholtz_project_coeffs(rng.standard_normal((2, e.K)), e)
            c = rng.standard_normal(e.K)
            gx = st.grids([u[0], u[1], e.dx(c), e.dy(c), c, np.zeros(e.K)])
            adv = e.to_coeffs(gx[0] * gx[2] + gx[1] * gx[3])
            pairing = abs(float(np.dot(adv, c)))
            bound = 1e-10 * np.sqrt(np.sum(u ** 2)) * np.sum(c ** 2)
            assert pairing <= bound

    def test_strong_order_one(self, small_basis):
        e = small_basis
        p = make_params(e, seed=3)
        from chemostokes.cli import canonical_state
        st = canonical_state(e)
        T, dt0 = 0.2, 1e-3
        fine = nz.sample_path(p.noise, int(T / (dt0 / 8)), dt0 / 8, 0)
        runs = {}
        for fac, label in ((8, "ref"), (1, "dt"), (2, "dt2")):
            npth = fine.coarsen(8 // fac) if fac != 8 else fine
            xi = np.tile(st.n, (npth.steps + 1, 1))
            from chemostokes.glue import run_coupled
            traj, _t, _b = run_coupled(st.copy(), e, p, npth, 1e9, stop=False)
            runs[label] = traj
        def dist(a, b):
            return np.sqrt(np.sum((a.n[-1] - b.n[-1]) ** 2)
                           + np.sum((a.c[-1] - b.c[-1]) ** 2)
                           + np.sum((a.u[-1] - b.u[-1]) ** 2))
        e1 = dist(runs["dt"], runs["ref"])
        e2 = dist(runs["dt2"], runs["ref"])
        assert 1.6 <= e1 / e2 <= 2.4

    def test_xi_grid_mismatch(self, small_basis):
        e = small_basis
        p = make_params(e)
        noise = nz.sample_path(p.noise, 10, 1e-3, 0)
        with pytest.raises(ValueError):
            lin.solve_linearized(np.zeros((5, e.K)), noise, e, p, 1.0,
                                 zero_state(e))
