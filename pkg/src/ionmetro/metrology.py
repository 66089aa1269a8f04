"""Fisher information, Cramer-Rao bounds and sensitivity extraction.

Sensitivities are quoted in the physical phase imprinted on the probe.  The
circuits are parametrised by the phase of their second element, which
equals the physical phase times :func:`ionmetro.interferometer.phase_scale`
(2 for a single-mode squeezed probe, whose squeezing axis turns at twice
the mode phase).  Fisher informations are converted accordingly.
"""

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DegenerateModelError, FisherDomainError, SlopeCheckError
from .fock import number_stats
from .interferometer import CIRCUIT_KINDS, FringeModel, nbar_to_size

P_EDGE = 1e-14
GOLDEN = (math.sqrt(5) - 1) / 2


def _check_mean(mean_n):
    if not mean_n > 0:
        raise DegenerateModelError(f"mean phonon number must be positive, got {mean_n}")


def cr_bound(kind, mean_n):
    """Closed-form phase uncertainty bound for the probe of each interferometer."""
    _check_mean(mean_n)
    if kind == "su2":
        return 1.0 / math.sqrt(mean_n)
    if kind == "su11_single":
        return 1.0 / math.sqrt(8 * mean_n * (mean_n + 1))
    if kind == "su11_two":
        return 1.0 / math.sqrt(mean_n * (2 + mean_n))
    raise ValueError(f"unknown interferometer kind {kind!r}")


def quantum_fisher_bound(kind, mean_n):
    return cr_bound(kind, mean_n) ** -2


def sql(mean_n):
    _check_mean(mean_n)
    return 1.0 / math.sqrt(mean_n)


def db_vs_sql(delta_phi, mean_n):
    """20 log10(delta_phi / SQL); negative values beat the standard quantum limit."""
    if not delta_phi > 0:
        raise ValueError(f"delta_phi must be positive, got {delta_phi}")
    _check_mean(mean_n)
    return 20.0 * math.log10(delta_phi * math.sqrt(mean_n))


def qfi_from_state(state, generator="number_a"):
    """4 x variance of a number operator (pure probe states)."""
    which = {"number_a": "mode_a", "number_b": "mode_b", "number_total": "total"}[generator]
    return 4.0 * number_stats(state, which).variance


def classical_fisher(p_down, dp_dphi):
    """Fisher information of a binary (up/down) measurement."""
    p = np.asarray(p_down, dtype=float)
    if np.any(p <= 0) or np.any(p >= 1):
        raise FisherDomainError(f"Fisher information undefined at P_down in {{0, 1}} (got {p_down})")
    out = np.asarray(dp_dphi, dtype=float) ** 2 / (p * (1 - p))
    return float(out) if out.ndim == 0 else out


def fisher_general(probs, dprobs):
    """sum_k (dP_k/dphi)^2 / P_k over all outcomes k."""
    probs = np.asarray(probs, dtype=float)
    dprobs = np.asarray(dprobs, dtype=float)
    if np.any(probs <= 0):
        raise FisherDomainError("every outcome probability must be positive")
    return float(np.sum(dprobs ** 2 / probs))


def fringe_fisher_profile(model, phi_grid, on_undefined="raise", check_slope=True, h=1e-5):
    """Classical Fisher information F(phi) of a fringe model in circuit phase.

    ``on_undefined='nan'`` returns NaN where P_down is 0 or 1 instead of raising.
    With ``check_slope`` the model's slope is compared with central differences
    of its own P_down at relative accuracy 1e-6.
    """
    phi = np.atleast_1d(np.asarray(phi_grid, dtype=float))
    p, dp = model.components(phi)[:2]
    if check_slope and isinstance(model, FringeModel):
        fd = (model.p_down(phi + h) - model.p_down(phi - h)) / (2 * h)
        scale = max(float(np.max(np.abs(dp))), 1e-300)
        worst = float(np.max(np.abs(fd - dp)))
        if worst > 1e-6 * scale + 1e-12:
            raise SlopeCheckError(f"analytic slope deviates from finite differences by {worst:.2e}")
    bad = (p <= 0) | (p >= 1)
    if np.any(bad) and on_undefined == "raise":
        raise FisherDomainError(
            f"P_down reaches 0 or 1 at phi = {phi[bad][0]:.6g}; use on_undefined='nan'")
    out = np.full_like(phi, np.nan)
    ok = ~bad
    out[ok] = dp[ok] ** 2 / (p[ok] * (1 - p[ok]))
    return out


def _fisher_at(model, phi):
    p, dp = model.components(phi)[:2]
    p, dp = float(p[0]), float(dp[0])
    if not P_EDGE < p < 1 - P_EDGE:
        return -math.inf
    return dp * dp / (p * (1 - p))


def golden_max(fn, lo, hi, tol):
    """Maximise a unimodal ``fn`` on [lo, hi]; returns (x, fn(x))."""
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = fn(d)
    return (c, fc) if fc >= fd else (d, fd)


def _grid_then_golden(fn, grid, tol):
    vals = np.array([fn(x) for x in grid])
    if not np.any(np.isfinite(vals)):
        return None, -math.inf
    i = int(np.nanargmax(np.where(np.isfinite(vals), vals, -np.inf)))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    x, f = golden_max(fn, lo, hi, tol)
    if f < vals[i]:
        return grid[i], vals[i]
    return x, f


def _max_over_phi(model, phi_grid, tol=1e-6):
    return _grid_then_golden(lambda x: _fisher_at(model, x), phi_grid, tol)


@dataclass(frozen=True)
class SensitivityReport:
    kind: str
    mean_n: float
    delta_phi: float
    phi_at_best: float
    cr_bound: float
    sql: float
    db_vs_sql: float
    beta_used: float
    fisher_max: float

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def max_sensitivity(model, phi_grid=None, optimize_beta=False, beta_grid=None, tol=1e-6):
    """Best phase sensitivity 1/sqrt(max_phi F) of a fringe model.

    With ``optimize_beta`` the readout pulse area is chosen first by a grid
    search plus golden-section refinement of max_phi F.
    """
    mean_n = model.mean_n
    if not mean_n > 0:
        raise DegenerateModelError("probe state has zero mean phonon number")
    if phi_grid is None:
        phi_grid = np.linspace(0.0, 2 * math.pi, 361)
    phi_grid = np.asarray(phi_grid, dtype=float)
    if optimize_beta:
        if beta_grid is None:
            beta_grid = np.linspace(0.05, math.pi, 48)
        coarse = phi_grid[:: max(1, len(phi_grid) // 120)]
        beta, _ = _grid_then_golden(
            lambda b: _max_over_phi(model.with_beta(b), coarse, 1e-4)[1],
            np.asarray(beta_grid, dtype=float), 1e-4)
        if beta is None:
            raise DegenerateModelError("no readout pulse area gives a usable fringe")
        model = model.with_beta(beta)
    phi_best, f_best = _max_over_phi(model, phi_grid, tol)
    if phi_best is None or not f_best > 0:
        raise DegenerateModelError("fringe carries no phase information")
    f_phys = model.phase_scale ** 2 * f_best
    delta = 1.0 / math.sqrt(f_phys)
    return SensitivityReport(
        kind=model.kind, mean_n=mean_n, delta_phi=delta, phi_at_best=float(phi_best),
        cr_bound=cr_bound(model.kind, mean_n), sql=sql(mean_n),
        db_vs_sql=db_vs_sql(delta, mean_n), beta_used=float(model.beta), fisher_max=f_phys)


def model_for_mean_n(kind, mean_n, beta=math.pi / 2, paper_literal=False):
    """Ideal fringe model whose probe carries ``mean_n`` phonons."""
    if kind not in CIRCUIT_KINDS:
        raise ValueError(f"unknown interferometer kind {kind!r}")
    if mean_n < 0:
        raise ValueError("mean_n must be non-negative")
    if kind == "su2":
        size = math.sqrt(mean_n)
    elif kind == "su11_single":
        size = 2 * nbar_to_size(kind, mean_n)
    else:
        size = 2 * nbar_to_size(kind, mean_n / 2)
    return FringeModel(kind, size, beta, paper_literal=paper_literal)


def sensitivity_table(kinds, mean_ns, optimize_beta=True, beta=math.pi / 2, phi_grid=None):
    reports = []
    for kind in kinds:
        for n in mean_ns:
            model = model_for_mean_n(kind, n, beta)
            reports.append(max_sensitivity(model, phi_grid, optimize_beta))
    return reports
