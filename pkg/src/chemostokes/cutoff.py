"""Smooth cut-off family, running-sup trackers and stopping-time detection.

The profile is the standard partition-of-unity bump

    phi(x) = psi(2 - |x|) / (psi(2 - |x|) + psi(|x| - 1)),   psi(t) = e^(-1/t)_+

so phi == 1 on [-1, 1], phi == 0 outside (-2, 2), smooth and even.  The
truncation factor applied to the advection term is phi(sup_norm / kappa);
stopping is detected on the discrete time grid as the first recorded time
with running sup >= kappa (closed threshold).
"""

import numpy as np


def _psi(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def phi(x):
    """Smooth even bump: 1 on |x| <= 1, 0 on |x| >= 2, monotone between."""
    x = np.abs(np.asarray(x, dtype=float))
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    a = _psi(2.0 - x)
    b = _psi(x - 1.0)
    out = np.where(x <= 1.0, 1.0, 0.0)
    mid = (x > 1.0) & (x < 2.0)
    out[mid] = a[mid] / (a[mid] + b[mid])
    return float(out[0]) if scalar else out


def _profile_lipschitz():
    xs = np.linspace(1.0, 2.0, 20001)
    return float(np.max(np.abs(np.diff(phi(xs)) / np.diff(xs))))


# max |phi'|, attained inside (1,2); frozen once, used by the Lipschitz tests
PROFILE_LIPSCHITZ = _profile_lipschitz()


class CutoffSpec:
    """Threshold kappa together with the fixed smooth profile."""

    def __init__(self, kappa):
        if kappa <= 0:
            raise ValueError("kappa must be positive")
        self.kappa = float(kappa)

    def value(self, x):
        return phi(x / self.kappa)


class TimeRegressionError(ValueError):
    pass


class RunningSup:
    """Nondecreasing running supremum of a monitored norm with history."""

    def __init__(self):
        self.current_sup = 0.0
        self.history = []          # (time, recorded value)
        self._last_t = -np.inf

    def update(self, t, value):
        if t < self._last_t:
            raise TimeRegressionError(
                "time regression: %r after %r" % (t, self._last_t))
        if value < 0:
            raise ValueError("monitored values must be nonnegative")
        self._last_t = t
        self.current_sup = max(self.current_sup, float(value))
        self.history.append((float(t), float(value)))
        return self

    def copy(self):
        c = RunningSup()
        c.current_sup = self.current_sup
        c.history = list(self.history)
        c._last_t = self._last_t
        return c


def theta(tracker, kappa):
    """Cut-off value phi(current_sup / kappa) in [0, 1]."""
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    return phi(tracker.current_sup / kappa)


def update(tracker, t, value):
    return tracker.update(t, value)


def check_stop(tracker, kappa):
    """First recorded time with running sup >= kappa, else None."""
    sup = 0.0
    for t, v in tracker.history:
        sup = max(sup, v)
        if sup >= kappa:
            return t
    return None


def cutoff_product(thetas):
    """Fold of several cut-off factors (single-factor in the application)."""
    out = 1.0
    for th in thetas:
        out *= th
    return out
