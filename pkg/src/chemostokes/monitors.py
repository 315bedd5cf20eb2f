"""Energy functionals, uniform-in-kappa bound checks, discrete residuals.

The Lyapunov candidate is the left-hand side of the a-priori bound for the
coupled system:

    sup|u|_{L2}^2, int |grad u|^2, sup|c|_{L2}^2, int |c|_{H1}^2,
    sup|n|_{H-1}^2, int |n|_{L^(q+1)}^(q+1), each to the power p, summed.

The residual check reconstructs the stepper's own discrete integral
identities (exponential-factor weights, dealiased products, the actual
noise increments), so a solver-produced trajectory is self-consistent to
round-off and any tampering shows up at first order.
"""

from dataclasses import dataclass

import numpy as np

from .linearized import Stepper
from .spectral import helmholtz_project_coeffs, sobolev_norm_coeffs


@dataclass
class EnergyReport:
    sup_u2: float
    int_uV: float
    sup_c2: float
    int_cH1: float
    sup_nHm1: float
    int_nq: float
    mass_n: np.ndarray

    @property
    def mass_drift(self):
        return float(np.max(np.abs(self.mass_n - self.mass_n[0])))

    def as_row(self):
        return [self.sup_u2, self.int_uV, self.sup_c2, self.int_cH1,
                self.sup_nHm1, self.int_nq, self.mass_drift]


def energy_report(traj, q):
    """Trapezoid-in-time functionals of one trajectory."""
    e = traj.eigen
    lam = e.lam
    dt = traj.dt
    u2 = np.sum(traj.u ** 2, axis=(1, 2))
    uV = np.sum(lam * traj.u ** 2, axis=(1, 2))
    c2 = np.sum(traj.c ** 2, axis=1)
    cH1 = np.sum((1.0 + lam) * traj.c ** 2, axis=1)
    nHm1 = np.sum(traj.n ** 2 / (1.0 + lam), axis=1)
    vals = e.to_values(traj.n)
    g = e.grid
    cell = g.area / (g.nx * g.ny)
    nq = np.sum(np.abs(vals) ** (q + 1.0), axis=(1, 2)) * cell
    mass = np.sqrt(g.area) * traj.n[:, 0] if (lam == 0).any() else \
        np.zeros(traj.n.shape[0])
    return EnergyReport(
        sup_u2=float(u2.max()),
        int_uV=float(np.trapezoid(uV, dx=dt)),
        sup_c2=float(c2.max()),
        int_cH1=float(np.trapezoid(cH1, dx=dt)),
        sup_nHm1=float(nHm1.max()),
        int_nq=float(np.trapezoid(nq, dx=dt)),
        mass_n=mass,
    )


def lyapunov_values(reports, p):
    vals = []
    for r in reports:
        vals.append(r.sup_u2 ** p + r.sup_c2 ** p + r.sup_nHm1 ** p
                    + r.int_nq ** p + r.int_cH1 ** p + r.int_uV ** p)
    return np.asarray(vals, dtype=float)


def lyapunov(reports, p):
    """Monte-Carlo estimate of the expected Lyapunov functional."""
    return float(lyapunov_values(reports, p).mean())


@dataclass
class KappaVerdict:
    passed: bool
    table: list            # rows: {kappa, lyapunov, se, blown_up}
    reason: str = ""


def uniform_kappa_check(state0, eigen, params, kappas, n_paths, T, p=1.0,
                        dt=1e-3, master_seed=0, theta_transform=None):
    """Run the cut-off coupled system at each kappa; PASS iff no growth trend.

    Verdict: max-over-kappa <= 1.25 * min-over-kappa + 3 combined standard
    errors.  Any blow-up fails with the offending kappa.
    """
    from .glue import run_coupled, _seeded_path
    if len(kappas) < 3:
        raise ValueError("need at least 3 kappa values")
    steps = int(round(T / dt))
    rows = []
    for kappa in kappas:
        reports = []
        for pid in range(n_paths):
            noise = _seeded_path(params.noise, master_seed, steps, dt, pid)
            traj, _tau, blown = run_coupled(state0.copy(), eigen, params,
                                            noise, kappa, stop=False,
                                            theta_transform=theta_transform)
            if blown:
                return KappaVerdict(False, rows,
                                    "blow-up at kappa=%g path %d" % (kappa, pid))
            reports.append(energy_report(traj, params.q))
        vals = lyapunov_values(reports, p)
        se = float(vals.std(ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else 0.0
        rows.append({"kappa": float(kappa), "lyapunov": float(vals.mean()),
                     "se": se, "paths": n_paths})
    return verdict_from_table(rows)


def verdict_from_table(rows):
    """The PASS/FAIL rule applied to a (kappa, lyapunov, se) table."""
    vals = np.array([r["lyapunov"] for r in rows])
    ses = np.array([r["se"] for r in rows])
    imax, imin = int(vals.argmax()), int(vals.argmin())
    combined = float(np.sqrt(ses[imax] ** 2 + ses[imin] ** 2))
    bound = 1.25 * vals[imin] + 3.0 * combined
    ok = vals[imax] <= bound
    reason = "" if ok else (
        "lyapunov at kappa=%g is %.4g > 1.25*min + 3SE = %.4g"
        % (rows[imax]["kappa"], vals[imax], bound))
    return KappaVerdict(bool(ok), rows, reason)


# -- discrete residuals of the stochastic integral identities ----------------

def residual_defn(traj, noise, params, xi=None, checkpoints=8):
    """Residual norms of the three discrete integral equations.

    Rebuilds each cumulative identity with the stepper's own quadrature
    weights and stochastic sums, evaluating it at evenly spaced checkpoint
    times.  xi defaults to the trajectory's own n component (the coupled
    reading); pass the frozen input to check a split-system solve.
    Returns {"t", "n", "c", "u"} with per-checkpoint residual norms in
    H^-1, L^2, L^2 respectively.
    """
    e = traj.eigen
    steps = traj.steps
    if noise.steps != steps or abs(noise.dt - traj.dt) > 1e-15 * traj.dt:
        raise ValueError("noise path does not match the trajectory grid")
    if xi is None:
        xi = traj.n
    xi = np.asarray(xi, dtype=float)
    if xi.shape != traj.n.shape:
        raise ValueError("xi must live on the trajectory grid")
    st = Stepper(e, params, traj.dt)
    dt = traj.dt
    p = params

    marks = sorted({int(round(k)) for k in
                    np.linspace(1, steps, checkpoints)})
    res_n, res_c, res_u, ts = [], [], [], []

    acc_u = np.zeros((2, e.K))
    acc_c = np.zeros(e.K)
    acc_n = np.zeros(e.K)
    mi = 0
    for i in range(steps):
        xi_t = xi[i]
        # u: u_{i+1} = Eu u_i + Wu F_i + sigma dW  =>  increment identity
        force = st.body_force(xi_t)
        acc_u = acc_u + (st.Eu - 1.0) * traj.u[i] + st.Wu * force
        if p.noise.amp3 != 0.0:
            from .noise import apply_sigma
            acc_u = acc_u + apply_sigma(e, p.noise.gamma3, noise.w3[i]).coeffs
        # c
        gx = st.grids([traj.u[i, 0], traj.u[i, 1], e.dx(traj.c[i]),
                       e.dy(traj.c[i]), traj.c[i], st.gmult2 * noise.w2[i]])
        prods = st.project_products([gx[0] * gx[2] + gx[1] * gx[3],
                                     gx[4] * gx[5]])
        th = traj.theta_cut[i] if traj.theta_cut.size else 1.0
        drift_c = p.beta * xi_t - p.delta_c * th * prods[0]
        acc_c = acc_c + (st.Ec - 1.0) * traj.c[i] + st.Wc * drift_c
        if p.noise.amp2 != 0.0:
            acc_c = acc_c + prods[1]
        # n
        gxn = st.grids([traj.n[i], e.dx(xi_t), e.dy(xi_t), xi_t,
                        st.gmult1 * noise.w1[i]])
        nv = gxn[0]
        porous = np.abs(nv) ** (p.q - 1.0) * nv
        chemo_x = gxn[3] * gx[2]
        chemo_y = gxn[3] * gx[3]
        transport = gx[0] * gxn[1] + gx[1] * gxn[2]
        noise_prod = nv * gxn[4]
        pn = st.project_products([porous, chemo_x, chemo_y, transport,
                                  noise_prod])
        tr_c = pn[3]
        if st.const_idx is not None:
            tr_c = tr_c.copy()
            tr_c[st.const_idx] = 0.0
        drift_n = (-p.r_n * e.lam * pn[0] + p.theta * xi_t
                   - p.chi * (e.dx(pn[1]) + e.dy(pn[2]))
                   - p.delta_n * tr_c)
        acc_n = acc_n + dt * drift_n
        if p.noise.amp1 != 0.0:
            acc_n = acc_n + pn[4]

        if mi < len(marks) and i + 1 == marks[mi]:
            m = i + 1
            ts.append(m * dt)
            res_u.append(float(np.sqrt(np.sum(
                (traj.u[m] - traj.u[0] - acc_u) ** 2))))
            res_c.append(float(np.sqrt(np.sum(
                (traj.c[m] - traj.c[0] - acc_c) ** 2))))
            rn = traj.n[m] - traj.n[0] - acc_n
            res_n.append(float(sobolev_norm_coeffs(rn, e, -1.0)))
            mi += 1

    return {"t": np.array(ts), "n": np.array(res_n),
            "c": np.array(res_c), "u": np.array(res_u)}


# -- interpolation inequality probe -------------------------------------------

def interpolation_check(trajs, eigen, dt, q, m, s, r, r_surrogate=2):
    """Empirical constant of the space-time interpolation bound (r=2 surrogate).

    For each trajectory the ratio

        |xi|_{L^m(0,T;H^-s_2)}^r
        ------------------------------------------------
        sup_t |xi|_{H^-1}^2  +  int |xi|_{L^(q+1)}^(q+1)

    is returned; exponent constraints are validated first.
    """
    if r_surrogate != 2:
        raise ValueError("only the r=2 spatial surrogate is computable here")
    if not (2.0 < r < q + 1.0):
        raise ValueError("need r in (2, q+1)")
    if not (m > q + 1.0):
        raise ValueError("need m > q+1")
    if not (0.0 < s < 1.0):
        raise ValueError("need s in (0,1)")
    if 1.0 / r < 1.0 / m + s / 2.0 - 1e-12:
        raise ValueError("need 1/r >= 1/m + s/2")
    lam = eigen.lam
    w_s = (1.0 + lam) ** (-s)
    w_m1 = 1.0 / (1.0 + lam)
    g = eigen.grid
    cell = g.area / (g.nx * g.ny)
    ratios = []
    for xi in trajs:
        xi = np.asarray(xi, dtype=float)
        sob = np.sqrt(np.sum(w_s * xi[:-1] ** 2, axis=-1))
        lhs = (dt * np.sum(sob ** m)) ** (1.0 / m)
        sup_hm1 = np.max(np.sum(w_m1 * xi ** 2, axis=-1))
        vals = eigen.to_values(xi)
        int_q = float(np.trapezoid(
            np.sum(np.abs(vals) ** (q + 1.0), axis=(1, 2)) * cell, dx=dt))
        rhs = sup_hm1 + int_q
        if rhs == 0.0:
            continue  # zero trajectory: 0/0, skipped
        ratios.append(lhs ** r / rhs)
    return {"ratios": np.asarray(ratios),
            "max_ratio": float(np.max(ratios)) if ratios else 0.0}
