"""The coupled worst-case pair

    du1/dt = -u1 + R* u1**2
    du2/dt = -u2 - u1

Two unit initial states ``psi = (1 - eps, delta)`` and ``phi = (1, 0)`` with
overlap ``1 - eps`` evolve (for ``R* = 1``) into states whose overlap drops
below ``2/sqrt(5)`` by ``t* = 3 log(1/eps)``. Everything here is closed form
except :func:`overlap_at_tstar_numeric`, which integrates the system
independently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analytics import query_lower_bound
from .errors import DomainError, SingularityError
from .quadratic_ode import QuadraticSystem
from .reference import IntegratorConfig, flow_map

EPS_MAX = math.exp(-3.0)
OVERLAP_CEILING = 2.0 / math.sqrt(5.0)


def _check_eps(epsilon):
    if not 0.0 < epsilon < EPS_MAX:
        raise DomainError(f"epsilon must lie in (0, e^-3 ~ {EPS_MAX:.4f}), got {epsilon}")


@dataclass(frozen=True)
class WorstcaseParams:
    r_star: float = 1.0
    epsilon: float = 0.01

    def __post_init__(self):
        if not self.r_star >= 1.0:
            raise DomainError(f"r_star must be >= 1, got {self.r_star}")
        _check_eps(self.epsilon)

    @property
    def delta(self) -> float:
        return delta_of(self.epsilon)


def delta_of(epsilon: float) -> float:
    """``sqrt(2 eps - eps**2)``, the second component of a unit ``psi``."""
    return math.sqrt(2.0 * epsilon - epsilon * epsilon)


def build_system(r_star: float = 1.0) -> QuadraticSystem:
    if not r_star > 0:
        raise DomainError(f"r_star must be positive, got {r_star}")
    return QuadraticSystem(2, [0], [0], [r_star], [[-1.0, 0.0], [-1.0, -1.0]], [0.0, 0.0],
                           name=f"worstcase(R*={r_star:g})")


def constants_from_initial(r_star: float, u0) -> tuple[float, float]:
    """``(c1, c2)`` of the general solution passing through ``u0`` at t = 0."""
    u1, u2 = float(u0[0]), float(u0[1])
    if u1 == 0.0:
        raise DomainError("u1(0) = 0 is not reached by the general solution")
    e_c1 = 1.0 / u1 - r_star
    if not e_c1 > 0:
        raise DomainError(f"no real c1: 1/u1(0) - R* = {e_c1:g} <= 0")
    c1 = math.log(e_c1)
    return c1, u2 + math.log(r_star + e_c1) / e_c1


def closed_form_general(r_star: float, c1: float, c2: float, t) -> np.ndarray:
    """General solution; rows of the result are ``(u1, u2)`` per time."""
    t = np.asarray(t, dtype=float)
    arg = r_star + np.exp(t + c1)
    if np.any(arg <= 0):
        raise SingularityError("R* + exp(t + c1) must stay positive")
    u1 = 1.0 / arg
    u2 = np.exp(-t) * (c2 - np.exp(-c1) * np.log(arg))
    return np.stack([u1, u2], axis=-1)


def closed_form_psi(epsilon: float, t) -> np.ndarray:
    """``u^psi(t)`` for ``R* = 1`` from ``(1 - eps, delta)``."""
    _check_eps(epsilon)
    t = np.asarray(t, dtype=float)
    delta = delta_of(epsilon)
    u1 = 1.0 / (1.0 + epsilon * np.exp(t) / (1.0 - epsilon))
    # log(1 - eps + e^t eps) written as log1p to survive eps -> 0
    log_term = np.log1p(epsilon * np.expm1(t))
    u2 = np.exp(-t) / epsilon * (epsilon * delta - (1.0 - epsilon) * log_term)
    return np.stack([u1, u2], axis=-1)


def closed_form_phi(t) -> np.ndarray:
    """``u^phi(t) = (1, e^-t - 1)``, the ``eps -> 0`` limit of psi."""
    t = np.asarray(t, dtype=float)
    return np.stack([np.ones_like(t), np.expm1(-t)], axis=-1)


def ratio_s(u) -> float:
    """``u1 / u2`` for a single state."""
    u1, u2 = float(u[0]), float(u[1])
    if u2 == 0.0:
        raise SingularityError("ratio undefined: u2 = 0")
    return u1 / u2


def ratio_series(states) -> np.ndarray:
    """``u1 / u2`` row-wise; ``u2 = ±0`` yields a signed infinity."""
    states = np.asarray(states, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return states[..., 0] / states[..., 1]


def s_psi(epsilon, t):
    return ratio_series(closed_form_psi(epsilon, t))


def s_phi(t):
    """``1 / (e^-t - 1)``; ``-inf`` at ``t = 0``."""
    return ratio_series(closed_form_phi(t))


def s_psi_bound(epsilon: float, t):
    """Upper bound ``2 / (t - log(1/eps))`` on ``|S_psi(t)|``."""
    _check_eps(epsilon)
    t = np.asarray(t, dtype=float)
    shift = t - math.log(1.0 / epsilon)
    if np.any(shift <= 0):
        raise DomainError("bound holds only for t > log(1/eps)")
    return 2.0 / shift


def _direct_overlap(a, b):
    num = np.abs(np.sum(a * b, axis=-1))
    return num / (np.linalg.norm(a, axis=-1) * np.linalg.norm(b, axis=-1))


def overlap_psi_phi(epsilon: float, t):
    """``|<psi(t)|phi(t)>|`` from the ratios ``S_psi`` and ``S_phi``.

    Uses ``|S_phi S_psi + 1| / (sqrt(S_phi^2 + 1) sqrt(S_psi^2 + 1))``; once
    both ratios are negative this is ``(|S_phi||S_psi| + 1) / ...``. At a
    pole of either ratio the states are compared directly.
    """
    t = np.asarray(t, dtype=float)
    psi, phi = closed_form_psi(epsilon, t), closed_form_phi(t)
    sp_, sf = ratio_series(psi), ratio_series(phi)
    finite = np.isfinite(sp_) & np.isfinite(sf)
    with np.errstate(invalid="ignore", over="ignore"):
        via_ratio = np.abs(sf * sp_ + 1.0) / (np.sqrt(sf**2 + 1.0) * np.sqrt(sp_**2 + 1.0))
    out = np.where(finite, via_ratio, _direct_overlap(psi, phi))
    return out if out.ndim else float(out)


def t_star(epsilon: float) -> float:
    return 3.0 * math.log(1.0 / epsilon)


def analytic_overlap_ceiling(epsilon: float) -> float:
    """Closed-form upper estimate of the overlap at ``t*``."""
    le = math.log(epsilon)
    a = epsilon**3 - 1.0
    return (1.0 + a * le) / (math.sqrt(1.0 + a * a) * math.sqrt(1.0 + le * le))


def scaled_initials(r: float, epsilon: float):
    """Unit initial states for ``R* = r`` that keep the overlap ``1 - eps``.

    Returns ``(u_phi0, u_psi0)``.
    """
    _check_eps(epsilon)
    if not r >= 1.0:
        raise DomainError(f"r must be >= 1, got {r}")
    d2 = 2.0 * epsilon - epsilon**2
    # 1 - 1/r^2 without cancellation near r = 1
    gap = (r - 1.0) * (r + 1.0) / r**2
    phi1 = 1.0 / r
    psi1 = (1.0 - epsilon) / r - math.sqrt(d2 * gap)
    if abs(psi1) > 1.0:
        raise DomainError("scaled psi component exceeds unit norm")
    u_phi0 = np.array([phi1, math.sqrt(gap)])
    u_psi0 = np.array([psi1, math.sqrt(max(0.0, 1.0 - psi1**2))])
    return u_phi0, u_psi0


# -- linearisation about u = (1, 0) ---------------------------------------------


def linearised_system() -> QuadraticSystem:
    """``x1' = x1``, ``x2' = -x1 - x2 - 1`` with ``u1 = 1 + x1``, ``u2 = x2``."""
    return QuadraticSystem(2, [], [], [], [[1.0, 0.0], [-1.0, -1.0]], [0.0, -1.0],
                           name="worstcase-linearised")


def linearised_solution(u0, t) -> np.ndarray:
    """Closed-form solution of the linearised system, in ``u`` coordinates."""
    t = np.asarray(t, dtype=float)
    a = float(u0[0]) - 1.0     # x1(0)
    b = float(u0[1])           # x2(0)
    x1 = a * np.exp(t)
    x2 = (b + 1.0 + 0.5 * a) * np.exp(-t) - 1.0 - 0.5 * a * np.exp(t)
    return np.stack([1.0 + x1, x2], axis=-1)


def s_psi_lin(epsilon: float, t):
    _check_eps(epsilon)
    return ratio_series(linearised_solution((1.0 - epsilon, delta_of(epsilon)), t))


def s_phi_lin(t):
    t = np.asarray(t, dtype=float)
    # x1 = 0 and x2 = e^-t - 1, evaluated with expm1 to keep the t=0 pole signed
    return ratio_series(np.stack([np.ones_like(t), np.expm1(-t)], axis=-1))


def divergence_time(epsilon: float, threshold: float = 0.1, t_max: float = 60.0,
                    n: int = 600_001) -> float:
    """First time ``|S_psi - S_psi^lin|`` exceeds ``threshold`` for good.

    Both ratios start positive and pass through a pole when ``u2`` changes
    sign; the search starts once both second components are negative and the
    ratios have come within ``threshold`` of each other.
    """
    t = np.linspace(0.0, t_max, n)
    psi = closed_form_psi(epsilon, t)
    lin = linearised_solution((1.0 - epsilon, delta_of(epsilon)), t)
    negative = (psi[:, 1] < 0) & (lin[:, 1] < 0)
    start = int(np.argmax(negative))
    if not negative[start]:
        raise DomainError("second components never turn negative on the grid")
    with np.errstate(divide="ignore", invalid="ignore"):
        gap = np.abs(psi[start:, 0] / psi[start:, 1] - lin[start:, 0] / lin[start:, 1])
    close = np.flatnonzero(gap <= threshold)
    if close.size == 0:
        raise DomainError("ratios never agree within threshold")
    apart = np.flatnonzero(gap[close[0]:] > threshold)
    if apart.size == 0:
        raise DomainError(f"no divergence before t = {t_max}")
    return float(t[start + close[0] + apart[0]])


def ratio_curves(epsilon: float, t):
    """``S_psi``, ``S_phi``, ``S_psi^lin``, ``S_phi^lin`` on the grid ``t``."""
    return {"t": np.asarray(t, dtype=float), "S_psi": s_psi(epsilon, t), "S_phi": s_phi(t),
            "S_psi_lin": s_psi_lin(epsilon, t), "S_phi_lin": s_phi_lin(t)}


# -- overlap at t* -----------------------------------------------------------------


def overlap_at_tstar_numeric(epsilon: float, cfg: IntegratorConfig | None = None) -> float:
    """Overlap at ``t*`` from reference-integrated states (no closed forms)."""
    _check_eps(epsilon)
    sys = build_system(1.0)
    ts = t_star(epsilon)
    psi = flow_map(sys, np.array([1.0 - epsilon, delta_of(epsilon)]), ts, cfg)
    phi = flow_map(sys, np.array([1.0, 0.0]), ts, cfg)
    return float(_direct_overlap(psi, phi))


def overlap_table_row(epsilon: float, cfg: IntegratorConfig | None = None,
                 numeric: bool = True) -> dict:
    """Overlap at ``t*`` by both routes, its ceilings and the query bound."""
    ts = t_star(epsilon)
    row = {"epsilon": epsilon, "t_star": ts, "overlap": overlap_psi_phi(epsilon, ts),
           "analytic_ceiling": analytic_overlap_ceiling(epsilon),
           "ceiling": OVERLAP_CEILING, "k_min": query_lower_bound(epsilon)}
    if numeric:
        row["overlap_numeric"] = overlap_at_tstar_numeric(epsilon, cfg)
    return row
