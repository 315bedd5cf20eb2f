"""Local runs up to the stopping time, independent restarts, kappa escalation.

Inside a segment the directly coupled system is integrated (the frozen input
is the current cell density, refreshed every step).  The running sup of the
velocity monitor is tracked; the segment truncates at the first grid time
with h >= kappa.  Before that time the cut-off factor is identically 1, so
the segment follows the uncut dynamics.  After a stop the run restarts from
the terminal state with an independent noise stream and kappa+1.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from . import cutoff
from .linearized import (BlowUpError, Stepper, SystemState, Trajectory,
                         h_norm_u, stability_dt)
from .noise import sample_path
from .spectral import helmholtz_project_coeffs

# offset separating per-segment noise streams from user-chosen path ids
SEGMENT_STREAM_BASE = 1 << 32


@dataclass
class Segment:
    start: float
    end: float
    kappa: float
    trajectory: Trajectory
    terminal: SystemState
    path_id: int
    stopped: bool
    tau: float = None
    blown_up: bool = False

    @property
    def steps(self):
        return self.trajectory.steps


@dataclass
class GlobalRun:
    segments: list = field(default_factory=list)
    escalations: int = 0
    completed: bool = False

    def boundary_jumps(self):
        """Max coefficient jump across adjacent segment boundaries."""
        jumps = [0.0]
        for a, b in zip(self.segments, self.segments[1:]):
            s0 = b.trajectory.state(0)
            t = a.terminal
            jumps.append(max(np.abs(s0.n - t.n).max(),
                             np.abs(s0.c - t.c).max(),
                             np.abs(s0.u - t.u).max()))
        return max(jumps)

    def summary(self):
        return {
            "completed": bool(self.completed),
            "escalations": int(self.escalations),
            "segments": [
                {
                    "start": seg.start,
                    "end": seg.end,
                    "kappa": seg.kappa,
                    "stopped": bool(seg.stopped),
                    "tau": seg.tau,
                    "blown_up": bool(seg.blown_up),
                    "path_id": int(seg.path_id),
                    "terminal_h": float(seg.trajectory.h_history[-1]),
                }
                for seg in self.segments
            ],
        }

    def to_json(self):
        return json.dumps(self.summary(), indent=2, sort_keys=True)


def run_coupled(state0, eigen, params, noise, kappa, theta_transform=None,
                enforce_stability=True, start_time=0.0, stop=True):
    """Integrate the coupled system feeding xi = n each step; stop at h >= kappa.

    Returns (trajectory, tau, blown): tau is the first grid time with
    h >= kappa (None if never reached, the trajectory then spans the whole
    horizon); blown marks a porous blow-up, the trajectory ending at the
    last completed step.  With stop=False the run records tau but keeps
    integrating the cut-off dynamics to the horizon.  theta_transform is a
    test fixture hook applied to the cut-off factor.
    """
    params.resolve(eigen)
    st = Stepper(eigen, params, noise.dt)
    dt = noise.dt
    steps = noise.steps
    K = eigen.K

    n = np.empty((steps + 1, K))
    c = np.empty((steps + 1, K))
    u = np.empty((steps + 1, 2, K))
    n[0] = state0.n
    c[0] = state0.c
    u[0] = helmholtz_project_coeffs(np.asarray(state0.u, dtype=float), eigen)

    tracker = cutoff.RunningSup()
    tracker.update(start_time, h_norm_u(u[0], eigen))
    theta_hist = np.empty(steps)
    h_hist = np.empty(steps + 1)
    h_hist[0] = tracker.current_sup
    tau = None
    blown = False
    last = 0

    if stop and tracker.current_sup >= kappa:
        tau = start_time
    else:
        e = eigen
        for i in range(steps):
            th = cutoff.theta(tracker, kappa)
            if theta_transform is not None:
                th = theta_transform(th, kappa)
            theta_hist[i] = th
            xi_t = n[i]
            try:
                if enforce_stability:
                    bound = stability_dt(n[i], eigen, params)
                    if dt > bound:
                        raise BlowUpError(
                            "dt=%g exceeds porous stability budget %g"
                            % (dt, bound))
                gx_c = st.grids([u[i, 0], u[i, 1], e.dx(c[i]), e.dy(c[i]),
                                 c[i], st.gmult2 * noise.w2[i]])
                part = st.grids([n[i], e.dx(xi_t), e.dy(xi_t),
                                 st.gmult1 * noise.w1[i]])
                gx_n = np.empty((9, st.M, st.M))
                gx_n[0] = part[0]
                gx_n[1] = gx_c[2]
                gx_n[2] = gx_c[3]
                gx_n[3] = gx_c[0]
                gx_n[4] = gx_c[1]
                gx_n[5] = part[1]
                gx_n[6] = part[2]
                gx_n[7] = part[0]
                gx_n[8] = part[3]
                nxt_u = st.step_u(u[i], xi_t, noise.w3[i])
                nxt_c = st.step_c(c[i], xi_t, u[i], th, noise.w2[i],
                                  grids=gx_c)
                nxt_n = st.step_n(n[i], xi_t, c[i], u[i], noise.w1[i],
                                  grids=gx_n)
            except BlowUpError:
                blown = True
                break
            u[i + 1] = nxt_u
            c[i + 1] = nxt_c
            n[i + 1] = nxt_n
            last = i + 1
            tracker.update(start_time + (i + 1) * dt,
                           h_norm_u(u[i + 1], eigen))
            h_hist[i + 1] = tracker.current_sup
            if tracker.current_sup >= kappa:
                if tau is None:
                    tau = start_time + (i + 1) * dt
                if stop:
                    break

    end = last
    traj = Trajectory(eigen, dt, n[:end + 1], c[:end + 1], u[:end + 1],
                      theta_hist[:end], h_hist[:end + 1])
    return traj, tau, blown


def run_local(state0, kappa, eigen, params, noise, horizon=None):
    """One local segment: coupled dynamics truncated at tau_kappa.

    On [0, tau) the recorded cut-off factor is identically 1, so the segment
    solves the uncut system.  A blow-up before tau yields a flagged segment.
    """
    if horizon is not None:
        steps = int(round(horizon / noise.dt))
        if steps < noise.steps:
            noise = type(noise)(noise.dt, noise.path_id,
                                noise.w1[:steps], noise.w2[:steps],
                                noise.w3[:steps])
    traj, tau, blown = run_coupled(state0, eigen, params, noise, kappa)
    end_t = tau if tau is not None else traj.steps * noise.dt
    return Segment(start=0.0, end=end_t, kappa=kappa, trajectory=traj,
                   terminal=traj.state(traj.steps), path_id=noise.path_id,
                   stopped=tau is not None, tau=tau, blown_up=blown)


def escalate_and_glue(state0, kappa0, eigen, params, T, master_seed,
                      dt=1e-3, max_escalations=16, kappa_step="increment"):
    """Glue local runs with fresh independent noise and kappa escalation.

    After each stopped segment the run resumes from the terminal state with
    kappa+1 (or doubled kappa) and a new noise stream derived from
    (master_seed, segment index).  Adjacent segments share boundary states
    exactly.
    """
    if kappa0 <= 0:
        raise ValueError("kappa0 must be positive")
    run = GlobalRun()
    t = 0.0
    kappa = float(kappa0)
    state = state0.copy()
    params = params.resolve(eigen)
    seg_index = 0
    while t < T - 1e-12:
        remaining_steps = int(round((T - t) / dt))
        if remaining_steps == 0:
            break
        stream = SEGMENT_STREAM_BASE + seg_index
        noise = _seeded_path(params.noise, master_seed, remaining_steps, dt,
                             stream)
        traj, tau, blown = run_coupled(state, eigen, params, noise, kappa,
                                       start_time=t)
        if blown:
            run.segments.append(Segment(t, t + traj.steps * dt, kappa, traj,
                                        traj.state(traj.steps), stream,
                                        False, None, True))
            break
        end_t = tau if tau is not None else T
        seg = Segment(start=t, end=end_t, kappa=kappa, trajectory=traj,
                      terminal=traj.state(traj.steps), path_id=stream,
                      stopped=tau is not None, tau=tau)
        run.segments.append(seg)
        state = seg.terminal.copy()
        t = seg.end
        if not seg.stopped:
            run.completed = True
            break
        kappa = kappa + 1.0 if kappa_step == "increment" else 2.0 * kappa
        run.escalations += 1
        seg_index += 1
        if run.escalations > max_escalations:
            break
    if t >= T - 1e-12:
        run.completed = True
    return run


def _seeded_path(cfg, master_seed, steps, dt, stream):
    import copy
    c = copy.copy(cfg)
    c.master_seed = master_seed
    return sample_path(c, steps, dt, stream)


def exceedance_prob(state0, eigen, params, kappas, n_paths, T, dt=1e-3,
                    master_seed=0):
    """Monte-Carlo P(tau_kappa <= T) per kappa, with binomial standard errors."""
    if n_paths < 16:
        raise ValueError("need at least 16 paths for the exceedance table")
    params = params.resolve(eigen)
    table = []
    for kappa in kappas:
        hits = 0
        for pid in range(n_paths):
            noise = _seeded_path(params.noise, master_seed,
                                 int(round(T / dt)), dt, pid)
            seg = run_local(state0.copy(), kappa, eigen, params, noise)
            hits += int(seg.stopped)
        p = hits / n_paths
        se = np.sqrt(max(p * (1 - p), 1.0 / n_paths ** 2) / n_paths)
        table.append({"kappa": float(kappa), "p_hat": p, "se": float(se),
                      "paths": n_paths})
    return table
