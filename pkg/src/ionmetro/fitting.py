"""Fringe fits, Fock-population fits and beamsplitter calibration."""

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares, nnls

from . import distributions
from .errors import (CalibrationError, ConfigError, ConvergenceError, RankDeficientError,
                     UnderResolvedError)
from .fock import Truncation, fock_state
from .interferometer import CIRCUIT_KINDS, FringeModel, nbar_to_size, size_to_nbar
from .metrology import golden_max
from .sideband import offres_response

GRAD_TOL = 1e-8


@dataclass
class FitResult:
    params: dict
    residual_rms: float
    covariance: np.ndarray = None
    converged: bool = True
    iterations: int = 0
    stderr: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def names(self):
        return list(self.params)

    def to_dict(self):
        cov = None if self.covariance is None else np.asarray(self.covariance).tolist()
        return {"params": {k: float(v) for k, v in self.params.items()},
                "stderr": {k: float(v) for k, v in self.stderr.items()},
                "residual_rms": float(self.residual_rms), "covariance": cov,
                "converged": bool(self.converged), "iterations": int(self.iterations),
                "diagnostics": self.diagnostics}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def populations(self):
        keys = sorted((k for k in self.params if k.startswith("P")), key=lambda k: int(k[1:]))
        return np.array([self.params[k] for k in keys])


def _binomial_sigma(p, shots):
    # Jeffreys-smoothed estimate keeps weights finite at p = 0 or 1
    k = np.asarray(p) * shots
    pt = (k + 0.5) / (shots + 1.0)
    return np.sqrt(pt * (1 - pt) / shots)


def _covariance(jw, resid_w, absolute):
    jtj = jw.T @ jw
    cov = np.linalg.pinv(jtj)
    if not absolute:
        dof = max(len(resid_w) - jw.shape[1], 1)
        cov = cov * float(resid_w @ resid_w) / dof
    return cov


# ---------------------------------------------------------------- fringe fits

def _wrap(phi):
    return (phi + math.pi) % (2 * math.pi) - math.pi


def fit_fringe(dataset, kind=None, beta=None, paper_literal=False, size_grid=None, max_nfev=400):
    """Weighted least-squares fit of an analytic fringe model.

    Free parameters are the state size (alpha0 or r0), the horizontal offset
    phi_offset and the vertical offset v_offset.  When the dataset records a
    shot count the residuals are weighted by binomial standard errors and the
    covariance is absolute; otherwise it is scaled by the residual variance.
    """
    program = dataset.program
    if kind is None:
        if program is None:
            raise ConfigError("fringe kind must be given when the dataset has no program")
        kind = program.kind
    if kind not in CIRCUIT_KINDS:
        raise ConfigError(f"unknown fringe kind {kind!r}")
    if beta is None:
        if program is None:
            raise ConfigError("readout pulse area beta must be given")
        beta = program.readout.beta
    phi, y = dataset.phi, dataset.p_down
    if len(phi) < 8:
        raise UnderResolvedError(f"need at least 8 fringe points, got {len(phi)}")
    if phi[-1] - phi[0] < math.pi:
        raise UnderResolvedError("fringe points must span at least half a period")
    if np.ptp(y) < 1e-12:
        raise RankDeficientError("flat fringe: state size and phase offset are not identifiable")

    shots = dataset.shots
    sigma = _binomial_sigma(y, shots) if shots else np.ones_like(y)

    def model(x):
        return FringeModel(kind, x[0], beta, x[1], x[2], paper_literal)

    def resid(x):
        return (model(x).p_down(phi) - y) / sigma

    def jac(x):
        p, dp, ds = model(x).components(phi)
        return np.column_stack([ds, -dp, np.ones_like(p)]) / sigma[:, None]

    phi0 = _wrap(phi[int(np.argmin(y))] - math.pi)
    v0 = float(max(y.min(), 0.0))
    if size_grid is None:
        top = nbar_to_size(kind, 12.0)
        size_grid = np.linspace(0.05, top, 40)
    costs = [float(np.sum(resid([s, phi0, v0]) ** 2)) for s in size_grid]
    x0 = np.array([size_grid[int(np.argmin(costs))], phi0, v0])

    sol = least_squares(resid, x0, jac=jac, method="lm", xtol=1e-15, ftol=1e-15,
                        gtol=1e-15, max_nfev=max_nfev)
    x = sol.x.copy()
    x[0] = abs(x[0])
    x[1] = _wrap(x[1])
    jw = jac(x)
    rw = resid(x)
    if np.linalg.matrix_rank(jw, tol=1e-10 * max(np.abs(jw).max(), 1e-300)) < 3:
        raise RankDeficientError("fringe Jacobian is rank deficient at the optimum")
    grad = float(np.linalg.norm(jw.T @ rw))
    scale = max(1.0, float(np.linalg.norm(rw)) * float(np.linalg.norm(jw)))
    converged = sol.status > 0 and grad <= GRAD_TOL * scale
    if sol.status == 0:
        raise ConvergenceError(f"fringe fit did not converge in {max_nfev} evaluations")
    cov = _covariance(jw, rw, absolute=bool(shots))
    names = ["size", "phi_offset", "v_offset"]
    params = dict(zip(names, map(float, x)))
    err = dict(zip(names, np.sqrt(np.maximum(np.diag(cov), 0.0))))
    nbar = size_to_nbar(kind, x[0])
    dn_ds = 2 * x[0] if kind == "su2" else math.sinh(2 * x[0])
    params["nbar"] = nbar
    err["nbar"] = abs(dn_ds) * err["size"]
    resid_raw = model(x).p_down(phi) - y
    return FitResult(
        params=params, residual_rms=float(np.sqrt(np.mean(resid_raw ** 2))), covariance=cov,
        converged=bool(converged), iterations=int(sol.nfev), stderr=err,
        diagnostics={"kind": kind, "beta": float(beta), "gradient_norm": grad,
                     "paper_literal": bool(paper_literal), "weighted": bool(shots)})


# ---------------------------------------------------------------- population fits

def rabi_design_matrix(times, n_max, omega_sb, kind="blue"):
    """A[t, n] = sin^2(omega_sb sqrt(n (+1)) t / 2): P_down for Fock level n."""
    n = np.arange(n_max + 1, dtype=float)
    rate = omega_sb * np.sqrt(n + 1 if kind == "blue" else n)
    return np.sin(np.outer(np.asarray(times, dtype=float), rate) / 2) ** 2


def _check_resolution(times, omega_max, omega_min):
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) < 2 or np.any(np.diff(times) <= 0):
        raise ConfigError("times must be a strictly increasing 1-D grid")
    dt = float(np.max(np.diff(times)))
    if dt * omega_max > math.pi:
        raise UnderResolvedError(
            f"time step {dt:.3e} s cannot resolve {omega_max / (2 * math.pi):.4g} Hz (Nyquist)")
    if (times[-1] - times[0]) * omega_min < 2 * math.pi:
        raise UnderResolvedError("time span shorter than one period of the slowest component")


def _simplex_lsq(a, y, sigma):
    """min ||(a p - y)/sigma|| subject to p >= 0, sum p = 1 (NNLS with a heavy
    sum-to-one row), followed by exact renormalisation."""
    aw = a / sigma[:, None]
    yw = y / sigma
    big = 1e4 * max(1.0, float(np.linalg.norm(aw, ord=2)))
    p, _ = nnls(np.vstack([aw, big * np.ones(a.shape[1])]), np.append(yw, big), maxiter=50 * a.shape[1])
    if p.sum() <= 0:
        raise ConvergenceError("population fit collapsed to zero")
    return p / p.sum()


def _population_cov(a, p, sigma, resid_w, absolute):
    """Covariance of the active (positive) populations with the trace constraint
    projected out."""
    k = len(p)
    active = np.nonzero(p > 1e-12)[0]
    cov = np.zeros((k, k))
    if len(active) < 2:
        return cov
    aw = (a / sigma[:, None])[:, active]
    m = len(active)
    # orthonormal basis of the sum-zero subspace
    z = np.linalg.qr(np.column_stack([np.ones(m), np.eye(m)[:, : m - 1]]))[0][:, 1:]
    h = z.T @ aw.T @ aw @ z
    sub = z @ np.linalg.pinv(h) @ z.T
    if not absolute:
        dof = max(len(resid_w) - (m - 1), 1)
        sub = sub * float(resid_w @ resid_w) / dof
    cov[np.ix_(active, active)] = sub
    return cov


def _population_result(a, p, times, y, sigma, absolute, diagnostics, iterations=1):
    resid = a @ p - y
    cov = _population_cov(a, p, sigma, resid / sigma, absolute)
    names = [f"P{n}" for n in range(len(p))]
    return FitResult(
        params=dict(zip(names, map(float, p))),
        residual_rms=float(np.sqrt(np.mean(resid ** 2))), covariance=cov, converged=True,
        iterations=iterations, stderr=dict(zip(names, np.sqrt(np.maximum(np.diag(cov), 0.0)))),
        diagnostics=diagnostics)


def fit_fock_populations(times, p_down, n_max, omega_sb, kind="blue", shots=None):
    """Model-free fit of Fock populations P(0..n_max) to a resonant sideband
    Rabi signal, constrained to the probability simplex."""
    if n_max < 1:
        raise ConfigError("n_max must be >= 1")
    top = n_max + 1 if kind == "blue" else n_max
    _check_resolution(times, omega_sb * math.sqrt(top), omega_sb)
    y = np.asarray(p_down, dtype=float)
    sigma = _binomial_sigma(y, shots) if shots else np.ones_like(y)
    a = rabi_design_matrix(times, n_max, omega_sb, kind)
    p = _simplex_lsq(a, y, sigma)
    return _population_result(a, p, times, y, sigma, bool(shots),
                              {"strategy": "joint", "model": "resonant", "kind": kind})


def initial_nbar_guess(times, p_down, omega_sb, kind="blue"):
    """Mean occupation from the early-time quadratic rise of P_down.

    P_down ~ (omega_sb t / 2)^2 (nbar + 1) (blue) or ... nbar (red) for small t.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(p_down, dtype=float)
    early = (t > 0) & (omega_sb * t < 0.3)
    if early.sum() < 2:
        early = np.zeros_like(t, dtype=bool)
        early[1: min(4, len(t))] = True
    x = (omega_sb * t[early] / 2) ** 2
    c = float(x @ y[early] / (x @ x))
    return max(c - 1.0 if kind == "blue" else c, 0.0)


def _coordinate_sweeps(a, y, sigma, p0, max_sweeps, tol):
    """Vary one population at a time, rescaling the others to keep the trace."""
    aw = a / sigma[:, None]
    yw = y / sigma
    p = np.asarray(p0, dtype=float).copy()
    p = np.clip(p, 0, None)
    p /= p.sum()
    for sweep in range(1, max_sweeps + 1):
        biggest = 0.0
        for k in range(len(p)):
            rest = 1.0 - p[k]
            if rest <= 1e-15:
                continue
            q = (aw @ p - aw[:, k] * p[k]) / rest  # unit-trace model of the others
            d = aw[:, k] - q
            dd = float(d @ d)
            if dd <= 0:
                continue
            new = float(np.clip(d @ (yw - q) / dd, 0.0, 1.0))
            scale = (1.0 - new) / rest
            change = abs(new - p[k])
            p *= scale
            p[k] = new
            biggest = max(biggest, change)
        if biggest < tol:
            return p / p.sum(), sweep, True
    return p / p.sum(), max_sweeps, False


def fit_fock_populations_offres(times, p_down, cfg, n_max, kind="blue", spectator="diagonal",
                                strategy="joint", initial="thermal", ideal_populations=None,
                                shots=None, max_sweeps=2000, sweep_tol=1e-9, method="exact"):
    """Simulation-based population fit against the two-mode off-resonant
    sideband dynamics.

    ``spectator`` fixes the second-mode occupation for Fock level n of the
    driven mode: 'diagonal' (n, n) as in a two-mode squeezed state, or
    'vacuum' (n, 0).  ``strategy`` is 'joint' (simplex least squares over all
    populations) or 'sweep' (one population at a time, the rest rescaled to
    preserve the trace, starting from ``initial``: 'thermal' or 'ideal').
    """
    if spectator not in ("diagonal", "vacuum"):
        raise ConfigError(f"spectator must be 'diagonal' or 'vacuum', got {spectator!r}")
    if strategy not in ("joint", "sweep"):
        raise ConfigError(f"strategy must be 'joint' or 'sweep', got {strategy!r}")
    omega_sb = cfg.eta_a * cfg.omega_carrier
    # the forward model is sampled on the data grid, so only the resonant
    # frequencies matter for identifiability
    top = n_max + 1 if kind == "blue" else n_max
    _check_resolution(times, omega_sb * math.sqrt(top), omega_sb)
    y = np.asarray(p_down, dtype=float)
    sigma = _binomial_sigma(y, shots) if shots else np.ones_like(y)
    tr = Truncation(n_max, n_max if spectator == "diagonal" else 1)
    states = [fock_state(tr, n, n if spectator == "diagonal" else 0) for n in range(n_max + 1)]
    a = offres_response(tr, cfg, states, times, kind, method=method)
    diag = {"strategy": strategy, "model": "off-resonant", "spectator": spectator, "kind": kind}
    if strategy == "joint":
        p = _simplex_lsq(a, y, sigma)
        return _population_result(a, p, times, y, sigma, bool(shots), diag)
    if initial == "ideal":
        if ideal_populations is None:
            raise ConfigError("initial='ideal' needs ideal_populations")
        p0 = np.zeros(n_max + 1)
        ideal = np.asarray(ideal_populations, dtype=float)[: n_max + 1]
        p0[: len(ideal)] = ideal
    elif initial == "thermal":
        nbar = initial_nbar_guess(times, y, omega_sb, kind)
        p0 = distributions.thermal(max(nbar, 1e-3), n_max)
        diag["initial_nbar"] = nbar
    else:
        raise ConfigError(f"initial must be 'thermal' or 'ideal', got {initial!r}")
    p, sweeps, ok = _coordinate_sweeps(a, y, sigma, p0, max_sweeps, sweep_tol)
    res = _population_result(a, p, times, y, sigma, bool(shots), diag, iterations=sweeps)
    res.converged = ok
    return res


# ---------------------------------------------------------------- calibration

def calibrate_beamsplitter(contrast_fn, amplitude_grid, tol=1e-7):
    """Drive amplitude maximising the interferometer fringe contrast.

    Grid search followed by golden-section refinement between the neighbours
    of the best grid point.  Warns when the optimum sits on the grid edge.
    """
    grid = np.asarray(amplitude_grid, dtype=float)
    if len(grid) < 3 or np.any(np.diff(grid) <= 0):
        raise ConfigError("amplitude grid needs >= 3 strictly increasing values")
    vals = np.array([contrast_fn(a) for a in grid])
    if np.ptp(vals) < 1e-12:
        raise CalibrationError("contrast does not depend on the drive amplitude")
    i = int(np.argmax(vals))
    if i in (0, len(grid) - 1):
        warnings.warn("contrast maximum lies on the amplitude grid boundary; widen the grid",
                      RuntimeWarning, stacklevel=2)
        return float(grid[i])
    amp, _ = golden_max(contrast_fn, grid[i - 1], grid[i + 1], tol)
    return float(amp)


def su2_contrast(alpha0=1.0, gain=1.0, beta=math.pi / 2):
    """Contrast evaluator: P_down(pi) - P_down(0) of a simulated SU(2) fringe
    whose beamsplitter mixing angle is ``gain * amplitude``."""
    from . import gates
    from .fock import make_vacuum
    from .interferometer import default_truncation
    from .sideband import sideband_pulse

    tr = default_truncation("su2", alpha0)
    start = gates.displacement(make_vacuum(tr), alpha0, "a")

    def p_down(mix, phi):
        s = gates.beamsplitter(start, mix, 0.0)
        s = gates.beamsplitter(s, mix, phi + math.pi)
        return sideband_pulse(s, beta, "red", "a").p_down

    def contrast(amplitude):
        mix = gain * amplitude
        return abs(p_down(mix, 0.0) - p_down(mix, math.pi))

    return contrast
