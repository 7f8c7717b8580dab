"""Envelope-times-sinusoid fringe fits to centroid histograms.

Model::

    y(X) = A * exp(-(X - mu)^2 / (2 sigma^2)) * (1 + V cos(k X + phi))

Solved by damped Gauss-Newton (Levenberg-Marquardt damping) with Poisson
weights. Internally the abscissa is shifted and scaled to bin units so the
normal equations stay well conditioned; results are mapped back to the
histogram's coordinates, covariance included.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .ocm import CentroidHistogram

log = logging.getLogger(__name__)

PARAM_NAMES = ("amplitude", "center", "sigma", "visibility", "phase", "frequency")
V_MAX = 1.5


class FitError(RuntimeError):
    pass


class DegenerateDataError(FitError):
    pass


class FitConvergenceError(FitError):
    def __init__(self, message, result):
        super().__init__(message)
        self.result = result


def envelope_sinusoid(x, amplitude, center, sigma, visibility, phase, frequency):
    x = np.asarray(x, dtype=np.float64)
    env = np.exp(-0.5 * ((x - center) / sigma) ** 2)
    return amplitude * env * (1 + visibility * np.cos(frequency * x + phase))


def _wrap(phase):
    return (phase + math.pi) % (2 * math.pi) - math.pi


@dataclass
class FitResult:
    params: dict
    sigmas: dict
    covariance: np.ndarray
    chi2: float
    dof: int
    converged: bool
    iterations: int
    frequency_fixed: bool
    raw_visibility: float = field(init=False)
    visibility_clipped: bool = field(init=False)

    def __post_init__(self):
        self.raw_visibility = float(self.params["visibility"])
        self.visibility_clipped = self.raw_visibility > 1

    @property
    def visibility(self):
        return min(max(self.raw_visibility, 0.0), 1.0)

    @property
    def visibility_sigma(self):
        return self.sigmas["visibility"]

    @property
    def period(self):
        return 2 * math.pi / abs(self.params["frequency"])

    @property
    def period_sigma(self):
        return self.period * self.sigmas["frequency"] / abs(self.params["frequency"])

    @property
    def reduced_chi2(self):
        return self.chi2 / self.dof if self.dof > 0 else float("nan")

    def __call__(self, x):
        return envelope_sinusoid(x, **self.params)

    def to_text(self):
        lines = []
        for name in PARAM_NAMES:
            lines.append(f"{name} = {self.params[name]!r}")
            lines.append(f"{name}_sigma = {self.sigmas[name]!r}")
        lines += [
            f"visibility_reported = {self.visibility!r}",
            f"visibility_clipped = {self.visibility_clipped}",
            f"period = {self.period!r}",
            f"chi2 = {self.chi2!r}",
            f"dof = {self.dof}",
            f"converged = {self.converged}",
            f"iterations = {self.iterations}",
            f"frequency_fixed = {self.frequency_fixed}",
            "covariance = " + "; ".join(" ".join(repr(float(v)) for v in row) for row in self.covariance),
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        kv = {}
        for line in text.splitlines():
            if "=" in line:
                k, _, v = line.partition("=")
                kv[k.strip()] = v.strip()
        cov = np.array([[float(v) for v in row.split()] for row in kv["covariance"].split(";")])
        return cls(
            params={n: float(kv[n]) for n in PARAM_NAMES},
            sigmas={n: float(kv[f"{n}_sigma"]) for n in PARAM_NAMES},
            covariance=cov,
            chi2=float(kv["chi2"]),
            dof=int(kv["dof"]),
            converged=kv["converged"] == "True",
            iterations=int(kv["iterations"]),
            frequency_fixed=kv["frequency_fixed"] == "True",
        )


def fourier_visibility(x, y, frequency):
    """Amplitude ratio ``2 |sum y e^{-ikx}| / sum y`` of the component at ``frequency``."""
    y = np.asarray(y, dtype=np.float64)
    return 2 * abs(np.sum(y * np.exp(-1j * frequency * np.asarray(x)))) / y.sum()


def _jacobian(t, p, free):
    A, mu, s, V, phi, k = p
    u = t - mu
    env = np.exp(-0.5 * (u / s) ** 2)
    c = np.cos(k * t + phi)
    sn = np.sin(k * t + phi)
    osc = 1 + V * c
    model = A * env * osc
    cols = [
        env * osc,
        model * u / s**2,
        model * u**2 / s**3,
        A * env * c,
        -A * env * V * sn,
        -A * env * V * sn * t,
    ]
    return model, np.stack([cols[j] for j in free], axis=1)


def _initial_frequency(t, y, A, mu, s):
    env = np.exp(-0.5 * ((t - mu) / s) ** 2)
    amp = np.sum(y * env) / np.sum(env * env)
    resid = y - amp * env
    grid = np.linspace(0.05 * math.pi, math.pi, 2000)
    power = np.abs(np.exp(-1j * np.outer(grid, t)) @ resid)
    # suppress the envelope's own low-frequency spectrum
    power *= 1 - np.exp(-0.5 * (grid * s) ** 2)
    return float(grid[np.argmax(power)])


def _lm(t, y, w, p, free, max_iter, rtol):
    p = p.copy()
    lam = 1e-3
    model, J = _jacobian(t, p, free)
    r = (y - model) * w
    chi2 = float(r @ r)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        Jw = J * w[:, None]
        H = Jw.T @ Jw
        g = Jw.T @ r
        accepted = False
        while lam < 1e16:
            step = np.linalg.solve(H + lam * np.diag(np.diag(H) + 1e-300), g)
            trial = p.copy()
            trial[free] += step
            if trial[3] < 0:
                trial[3] = -trial[3]
                trial[4] += math.pi
            trial[4] = _wrap(trial[4])
            if trial[2] > 0 and trial[0] >= 0 and trial[3] <= V_MAX:
                m_new, J_new = _jacobian(t, trial, free)
                r_new = (y - m_new) * w
                chi2_new = float(r_new @ r_new)
                if chi2_new <= chi2:
                    accepted = True
                    break
            lam *= 10
        if not accepted:
            # no downhill step at any damping: stationary to rounding
            converged = True
            break
        delta = trial[free] - p[free]
        iphase = free.index(4)
        delta[iphase] = _wrap(delta[iphase])
        scale = np.maximum(np.abs(p[free]), 1e-6)
        p, model, J, r, chi2 = trial, m_new, J_new, r_new, chi2_new
        lam = max(lam / 10, 1e-12)
        if np.all(np.abs(delta) <= rtol * scale):
            converged = True
            break
    Jw = J * w[:, None]
    return p, chi2, Jw.T @ Jw, converged, it


def fit_fringe(
    hist: CentroidHistogram,
    k_constraint: Optional[float] = None,
    *,
    k_guess: Optional[float] = None,
    max_iter: int = 200,
    rtol: float = 1e-8,
) -> FitResult:
    """Weighted least-squares fit of the envelope-sinusoid model.

    ``k_constraint`` fixes the angular frequency (in inverse units of the
    histogram's centroid coordinate); otherwise it is fitted, starting from
    ``k_guess`` or a periodogram peak. Weights are ``1/errors`` with a floor
    of 1 for bins whose error is zero.
    """
    x = hist.centroids
    y = hist.counts
    err = hist.errors.copy()
    err[err <= 0] = 1.0
    populated = np.count_nonzero(y > 0)
    if populated <= 2:
        raise DegenerateDataError(f"all counts fall in {populated} bin(s); nothing to fit")
    if populated < 8:
        raise DegenerateDataError(f"need at least 8 populated bins, got {populated}")

    x0 = float(x[0])
    h = float(x[1] - x[0])
    t = (x - x0) / h
    w = 1 / err

    pos = np.clip(y, 0, None)
    A0 = float(pos.max())
    mu0 = float(np.sum(pos * t) / pos.sum())
    s0 = float(math.sqrt(np.sum(pos * (t - mu0) ** 2) / pos.sum())) or 1.0
    if k_constraint is not None:
        k0 = k_constraint * h
    elif k_guess is not None:
        k0 = k_guess * h
    else:
        k0 = _initial_frequency(t, pos, A0, mu0, s0)
    c = np.sum(y * np.exp(-1j * k0 * t))
    V0 = min(2 * abs(c) / y.sum(), 1.0)
    phi0 = float(np.angle(c))
    p0 = np.array([A0 / (1 + V0), mu0, s0, V0, phi0, k0])

    free = [0, 1, 2, 3, 4] if k_constraint is not None else [0, 1, 2, 3, 4, 5]
    p, chi2, H, converged, iterations = _lm(t, y, w, p0, free, max_iter, rtol)

    try:
        cov_free = np.linalg.inv(H)
    except np.linalg.LinAlgError:
        cov_free = np.linalg.pinv(H)
    cov_t = np.zeros((6, 6))
    cov_t[np.ix_(free, free)] = cov_free

    # back to histogram coordinates: X = x0 + h t
    A, mu, s, V, phi, k = p
    params = {
        "amplitude": A,
        "center": x0 + h * mu,
        "sigma": h * s,
        "visibility": V,
        "phase": _wrap(phi - k * x0 / h),
        "frequency": k / h,
    }
    T = np.diag([1.0, h, h, 1.0, 1.0, 1 / h])
    T[4, 5] = -x0 / h
    cov = T @ cov_t @ T.T
    sig = np.sqrt(np.clip(np.diag(cov), 0, None))
    result = FitResult(
        params={n: float(params[n]) for n in PARAM_NAMES},
        sigmas={n: float(v) for n, v in zip(PARAM_NAMES, sig)},
        covariance=cov,
        chi2=chi2,
        dof=y.size - len(free),
        converged=converged,
        iterations=iterations,
        frequency_fixed=k_constraint is not None,
    )
    if not converged:
        raise FitConvergenceError(f"fit did not converge in {max_iter} iterations", result)
    return result
