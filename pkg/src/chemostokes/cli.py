"""Experiment orchestration: flat config files, four run modes, CSV/JSON out.

Config files are flat `key = value` documents ('#' comments allowed); every
key has a default, unknown keys are rejected, and the resolved config is
echoed to the output directory so any run can be reproduced by pointing at
its own echo.  All ensemble reductions run in path-id order, so outputs are
byte-identical across reruns regardless of how work is scheduled.

Exit codes: 0 pass, 1 check failure, 2 configuration error, 3 blow-up.
"""

import argparse
import json
import os
import sys
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import monitors
from .fixedpoint import FixpointConfig, picard
from .glue import escalate_and_glue, exceedance_prob, run_coupled, _seeded_path
from .linearized import BlowUpError, ModelParams, SystemState
from .noise import NoiseConfig
from .spectral import (ConfigurationError, Grid, SpectralField,
                       build_eigenbasis, save_snapshot)


class ConfigError(ValueError):
    pass


def _parse_kappa(text):
    vals = [float(v) for v in str(text).split(",") if v != ""]
    if not vals:
        raise ConfigError("kappa list is empty")
    return vals


# key -> (parser, default)
_SCHEMA = {
    "nx": (int, 64),
    "ny": (int, 64),
    "side": (float, 2.0 * np.pi),
    "k_modes": (int, 200),
    "r_n": (float, 1.0),
    "r_c": (float, 1.0),
    "r_u": (float, 1.0),
    "chi": (float, 1.0),
    "zeta": (float, 5.0),
    "beta": (float, 1.0),
    "q": (float, 5.0),
    "delta1": (float, 0.1),
    "delta2": (float, 0.1),
    "delta_n": (float, 1.0),
    "delta_c": (float, 1.0),
    "gamma1": (float, 2.5),
    "gamma2": (float, 2.5),
    "gamma3": (float, 1.5),
    "amp1": (float, 1.0),
    "amp2": (float, 1.0),
    "amp3": (float, 1.0),
    "master_seed": (int, 0),
    "m_star": (int, 12),
    "r_star": (float, 5.0),
    "tol": (float, 1e-6),
    "max_iter": (int, 30),
    "haar_level": (int, 0),
    "T": (float, 0.5),
    "dt": (float, 1e-3),
    "paths": (int, 32),
    "kappa": (_parse_kappa, [4.0]),
    "mode": (str, "simulate"),
    "ic_scale": (float, 1.0),
}


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)

    def __getattr__(self, name):
        try:
            return self.values[name]
        except KeyError:
            raise AttributeError(name)

    # -- derived objects ---------------------------------------------------

    def grid(self):
        return Grid(self.nx, self.ny, self.side)

    def eigen(self):
        return build_eigenbasis(self.grid(), K=self.k_modes)

    def noise_config(self):
        return NoiseConfig(gamma1=self.gamma1, gamma2=self.gamma2,
                           gamma3=self.gamma3, K=self.k_modes,
                           master_seed=self.master_seed,
                           amp1=self.amp1, amp2=self.amp2, amp3=self.amp3)

    def model_params(self):
        return ModelParams(r_n=self.r_n, r_c=self.r_c, r_u=self.r_u,
                           chi=self.chi, zeta=self.zeta, beta=self.beta,
                           q=self.q, delta1=self.delta1, delta2=self.delta2,
                           delta_n=self.delta_n, delta_c=self.delta_c,
                           noise=self.noise_config())

    def fixpoint_config(self):
        return FixpointConfig(q=self.q, m_star=self.m_star,
                              r_star=self.r_star, tol=self.tol,
                              max_iter=self.max_iter,
                              haar_level=self.haar_level)

    @property
    def steps(self):
        return int(round(self.T / self.dt))

    def echo_lines(self):
        lines = ["# resolved configuration"]
        for key in _SCHEMA:
            v = self.values[key]
            if isinstance(v, list):
                v = ",".join(repr(x) for x in v)
            elif isinstance(v, float):
                v = repr(v)
            lines.append("%s = %s" % (key, v))
        return "\n".join(lines) + "\n"


def _validate(values):
    if values["q"] <= 4:
        raise ConfigError(
            "q = %g rejected: the porous exponent must exceed 4 for the "
            "well-posedness regime this solver targets" % values["q"])
    if values["m_star"] < 2 * values["q"] + 2:
        raise ConfigError("m_star must be >= 2q+2 = %g" % (2 * values["q"] + 2))
    if not (values["q"] <= values["r_star"] < values["q"] + 1):
        raise ConfigError("r_star must lie in [q, q+1)")
    if values["dt"] <= 0 or values["T"] <= 0:
        raise ConfigError("T and dt must be positive")
    if values["paths"] < 1:
        raise ConfigError("paths must be >= 1")
    if any(k <= 0 for k in values["kappa"]):
        raise ConfigError("kappa values must be positive")
    if min(values["r_n"], values["r_c"], values["r_u"]) <= 0:
        raise ConfigError("diffusivities must be positive")
    if values["nx"] % 2 or values["ny"] % 2 or min(values["nx"], values["ny"]) < 4:
        raise ConfigError("grid dimensions must be even and >= 4")
    d = 2
    if values["gamma1"] <= 1 + d / 2:
        warnings.warn("gamma1 = %g is at or below the H^-1 Hilbert-Schmidt "
                      "finiteness threshold (1+d/2 = 2); run permitted for "
                      "divergence experiments" % values["gamma1"])
    if values["gamma2"] <= 3 * d / 2 - 1:
        warnings.warn("gamma2 = %g is at or below the L^2 Hilbert-Schmidt "
                      "finiteness threshold (3d/2-1 = 2)" % values["gamma2"])
    if values["gamma3"] <= 1:
        warnings.warn("gamma3 = %g is at or below the velocity-noise "
                      "threshold 1" % values["gamma3"])
    alpha = values["zeta"] - 0.5 * values["gamma2"] ** 2
    if alpha <= 0:
        warnings.warn("zeta - gamma2^2/2 = %g <= 0: damping coercivity lost"
                      % alpha)


def load_config(path=None, overrides=None):
    """Parse a flat key=value file, apply defaults, validate everything."""
    values = {k: d for k, (_p, d) in _SCHEMA.items()}
    if path is not None:
        with open(path) as fh:
            for ln, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError("%s:%d: expected `key = value`" % (path, ln))
                key, _, val = line.partition("=")
                key = key.strip()
                val = val.strip()
                if key not in _SCHEMA:
                    raise ConfigError("%s:%d: unknown key %r" % (path, ln, key))
                try:
                    values[key] = _SCHEMA[key][0](val)
                except ConfigError:
                    raise
                except Exception as err:
                    raise ConfigError("%s:%d: bad value for %s: %s"
                                      % (path, ln, key, err))
    for key, val in (overrides or {}).items():
        if key not in _SCHEMA:
            raise ConfigError("unknown override %r" % key)
        values[key] = _SCHEMA[key][0](val) if isinstance(val, str) else val
    _validate(values)
    return RunConfig(values)


# -- canonical initial data ----------------------------------------------------

def canonical_state(eigen, scale=1.0):
    """Fixed smooth initial data: positive bump in n, mild c, curl-type u.

    Amplitudes leave the porous stability budget a ~4x margin over the
    default dt even after the exponential mass growth of a T=0.5 run.
    """
    g = eigen.grid
    X, Y = np.meshgrid(g.x, g.y, indexing="ij")
    kf = 2.0 * np.pi / g.side
    n0 = 0.14 + 0.03 * np.cos(kf * X) + 0.02 * np.sin(kf * Y) \
        + 0.01 * np.cos(kf * (X + Y))
    c0 = 0.08 + 0.02 * np.cos(kf * Y) + 0.015 * np.sin(kf * X)
    psi = 0.05 * np.cos(kf * X) + 0.04 * np.sin(kf * Y) \
        + 0.025 * np.cos(kf * (X - Y))
    n = eigen.to_coeffs(n0) * scale
    c = eigen.to_coeffs(c0) * scale
    psi_c = eigen.to_coeffs(psi) * scale
    u = np.stack([-eigen.dy(psi_c), eigen.dx(psi_c)])
    return SystemState(n, c, u)


# -- deterministic writers ------------------------------------------------------

def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


_GNUPLOT = """# gnuplot companion for energy.csv / monitors.csv
set datafile separator ','
set key autotitle columnhead
set terminal pngcairo size 900,600
set output 'energy.png'
plot 'monitors.csv' using 1:3 with linespoints title 'u L2', \\
     'monitors.csv' using 1:4 with linespoints title 'c L2', \\
     'monitors.csv' using 1:5 with linespoints title 'n H-1'
"""


# -- run modes -------------------------------------------------------------------

def _mode_simulate(cfg, out):
    eigen = cfg.eigen()
    params = cfg.model_params().resolve(eigen)
    state0 = canonical_state(eigen, cfg.ic_scale)
    kappa = cfg.kappa[0]
    e_rows, m_rows = [], []
    lam = eigen.lam
    checkpoints = np.unique(np.linspace(0, cfg.steps, 9).astype(int))
    for pid in range(cfg.paths):
        noisep = _seeded_path(params.noise, cfg.master_seed, cfg.steps,
                              cfg.dt, pid)
        traj, _tau, blown = run_coupled(state0.copy(), eigen, params, noisep,
                                        kappa, stop=False)
        if blown:
            raise BlowUpError("path %d blew up" % pid)
        rep = monitors.energy_report(traj, cfg.q)
        e_rows.append([pid, kappa] + rep.as_row())
        for i in checkpoints:
            m_rows.append([float(i * cfg.dt), pid,
                           float(np.sqrt(np.sum(traj.u[i] ** 2))),
                           float(np.sqrt(np.sum(traj.c[i] ** 2))),
                           float(np.sqrt(np.sum(traj.n[i] ** 2 / (1 + lam)))),
                           float(rep.mass_n[i])])
        for name, coeffs in (("n", traj.n[-1]), ("c", traj.c[-1])):
            save_snapshot(SpectralField(coeffs, eigen),
                          os.path.join(out, "snapshot_%s_p%d.txt" % (name, pid)))
    write_csv(os.path.join(out, "energy.csv"),
              ["path_id", "kappa", "sup_u2", "int_uV", "sup_c2", "int_cH1",
               "sup_nHm1", "int_nq", "mass_drift"], e_rows)
    m_rows.sort(key=lambda r: (r[0], r[1]))
    write_csv(os.path.join(out, "monitors.csv"),
              ["time", "path_id", "u_l2", "c_l2", "n_hm1", "mass_n"], m_rows)
    with open(os.path.join(out, "plot.gp"), "w") as fh:
        fh.write(_GNUPLOT)
    return 0


def _mode_fixpoint(cfg, out):
    eigen = cfg.eigen()
    params = cfg.model_params().resolve(eigen)
    fp = cfg.fixpoint_config()
    state0 = canonical_state(eigen, cfg.ic_scale)
    kappa = cfg.kappa[0]
    rows = []
    summary = []
    for pid in range(cfg.paths):
        noisep = _seeded_path(params.noise, cfg.master_seed, cfg.steps,
                              cfg.dt, pid)
        xi0 = np.tile(state0.n, (cfg.steps + 1, 1))
        result = picard(xi0, noisep, eigen, params, fp, kappa, state0)
        for it, (res, xn) in enumerate(zip(result.residuals, result.x_norms)):
            rows.append([it, res, xn])
        summary.append({"path_id": pid, "converged": result.converged,
                        "iterations": result.iterations,
                        "final_residual": result.residuals[-1]})
    write_csv(os.path.join(out, "residuals.csv"),
              ["iter", "residual", "x_norm"], rows)
    with open(os.path.join(out, "fixpoint.json"), "w") as fh:
        json.dump({"paths": summary}, fh, indent=2, sort_keys=True)
    n_conv = sum(1 for s in summary if s["converged"])
    return 0 if n_conv == cfg.paths else 1


def _mode_glue(cfg, out):
    eigen = cfg.eigen()
    params = cfg.model_params().resolve(eigen)
    state0 = canonical_state(eigen, cfg.ic_scale)
    run_obj = escalate_and_glue(state0, cfg.kappa[0], eigen, params, cfg.T,
                                cfg.master_seed, dt=cfg.dt)
    with open(os.path.join(out, "glue.json"), "w") as fh:
        fh.write(run_obj.to_json() + "\n")
    kappas = cfg.kappa if len(cfg.kappa) > 1 else [1.0, 2.0, 4.0, 8.0]
    n = max(16, cfg.paths)
    table = exceedance_prob(state0, eigen, params, kappas, n, cfg.T,
                            dt=cfg.dt, master_seed=cfg.master_seed)
    write_csv(os.path.join(out, "exceedance.csv"),
              ["kappa", "p_hat", "se", "paths"],
              [[r["kappa"], r["p_hat"], r["se"], r["paths"]] for r in table])
    return 0 if run_obj.completed else 1


def _mode_verify(cfg, out):
    from .verification import run_all
    results = run_all(cfg)
    payload = {
        "passed": all(r["passed"] for r in results),
        "criteria": results,
    }
    with open(os.path.join(out, "verify.json"), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=str)
    for r in results:
        print("%-28s %s" % (r["name"], "PASS" if r["passed"] else "FAIL"))
    return 0 if payload["passed"] else 1


MODES = {
    "simulate": _mode_simulate,
    "fixpoint": _mode_fixpoint,
    "glue": _mode_glue,
    "verify": _mode_verify,
}


def run(mode, cfg, out_dir):
    if mode not in MODES:
        raise ConfigError("unknown mode %r" % mode)
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.echo"), "w") as fh:
        fh.write(cfg.echo_lines())
    try:
        return MODES[mode](cfg, out_dir)
    except BlowUpError as err:
        with open(os.path.join(out_dir, "failure.json"), "w") as fh:
            json.dump({"error": "blow-up", "detail": str(err)}, fh, indent=2)
        print("numerical blow-up: %s" % err, file=sys.stderr)
        return 3


def main(argv=None):
    ap = argparse.ArgumentParser(prog="chemostokes",
                                 description="stochastic chemotaxis-Stokes "
                                             "simulator and verifier")
    ap.add_argument("mode", choices=sorted(MODES))
    ap.add_argument("--config", default=None)
    ap.add_argument("--out", default="out")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--paths", type=int, default=None)
    ap.add_argument("--kappa", type=str, default=None)
    args = ap.parse_args(argv)
    overrides = {"mode": args.mode}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.paths is not None:
        overrides["paths"] = args.paths
    if args.kappa is not None:
        overrides["kappa"] = args.kappa
    try:
        cfg = load_config(args.config, overrides)
    except (ConfigError, ConfigurationError, OSError) as err:
        print("configuration error: %s" % err, file=sys.stderr)
        return 2
    return run(args.mode, cfg, args.out)


if __name__ == "__main__":
    sys.exit(main())
