"""High-accuracy nonlinear reference solutions and the flow map.

The solver is SciPy's Dormand-Prince 8(5,3) pair with dense output. Chaotic
runs over long horizons (hundreds of time units) are not reproducible point
by point against any other solver; only statistics of such runs
(Lyapunov exponents, attractor extent) are meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ContractError, DivergenceError, StiffnessError
from .quadratic_ode import QuadraticSystem
from .trajectory import Trajectory


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-12
    abs_tol: float = 1e-14
    max_step: float = np.inf
    dense_output: bool = True
    #: Norm at which a solution is declared to have blown up.
    blowup_norm: float = 1e12

    def __post_init__(self):
        if not 0 < self.rel_tol < 1e-3:
            raise ContractError(f"rel_tol must lie in (0, 1e-3), got {self.rel_tol}")
        if not self.abs_tol > 0:
            raise ContractError(f"abs_tol must be positive, got {self.abs_tol}")
        if not self.max_step > 0:
            raise ContractError(f"max_step must be positive, got {self.max_step}")


def make_rhs(sys: QuadraticSystem):
    """A lean ``f(t, u)`` closure for the solver (no shape checks)."""
    n = sys.dim
    f1, f0 = np.array(sys.f1), np.array(sys.f0)
    rows = np.array(sys.f2_rows)
    left, right = sys.f2_cols // n, sys.f2_cols % n
    vals = np.array(sys.f2_vals)
    if vals.size == 0:
        return lambda t, u: f1 @ u + f0

    def f(t, u):
        out = f1 @ u + f0
        out += np.bincount(rows, weights=vals * u[left] * u[right], minlength=n)
        return out

    return f


def _check_u0(sys, u0):
    u0 = np.asarray(u0, dtype=float)
    if u0.shape != (sys.dim,):
        raise ContractError(f"u0 must have shape ({sys.dim},), got {u0.shape}")
    if not np.all(np.isfinite(u0)):
        raise ContractError("u0 must be finite")
    return u0


def integrate_reference(sys: QuadraticSystem, u0, t_end: float,
                        cfg: IntegratorConfig | None = None, t_eval=None) -> Trajectory:
    """Integrate the full nonlinear system from ``u0`` to ``t_end``.

    Without ``t_eval`` the trajectory holds the accepted solver steps;
    otherwise it is sampled on ``t_eval`` (which must start at 0). With
    ``cfg.dense_output`` the returned :class:`Trajectory` can be evaluated
    anywhere in ``[0, t_end]``.

    Raises:
        DivergenceError: the state became non-finite or exceeded
            ``cfg.blowup_norm``.
        StiffnessError: the step size underflowed on a finite solution.
    """
    cfg = cfg or IntegratorConfig()
    u0 = _check_u0(sys, u0)
    if not t_end > 0:
        raise ContractError(f"t_end must be positive, got {t_end}")
    if t_eval is not None:
        t_eval = np.asarray(t_eval, dtype=float)
        if t_eval[0] != 0.0 or t_eval[-1] > t_end:
            raise ContractError("t_eval must start at 0 and end within t_end")

    def blowup(t, u):
        return np.dot(u, u) - cfg.blowup_norm**2

    blowup.terminal = True
    with np.errstate(over="ignore", invalid="ignore"):
        res = solve_ivp(make_rhs(sys), (0.0, float(t_end)), u0, method="DOP853",
                        rtol=cfg.rel_tol, atol=cfg.abs_tol, max_step=cfg.max_step,
                        dense_output=cfg.dense_output, t_eval=t_eval, events=blowup)
    if res.status == 1 or not np.all(np.isfinite(res.y)):
        bad = ~np.all(np.isfinite(res.y), axis=0)
        t_bad = float(res.t[np.argmax(bad)]) if bad.any() else float(res.t_events[0][0])
        raise DivergenceError(f"reference solution blew up near t = {t_bad:.6g}", t_bad)
    if res.status < 0:
        last = res.y[:, -1] if res.y.size else u0
        if np.linalg.norm(last) > 1e6 * (1 + np.linalg.norm(u0)):
            t_bad = float(res.t[-1]) if res.t.size else 0.0
            raise DivergenceError(f"reference solution blew up near t = {t_bad:.6g}", t_bad)
        raise StiffnessError(f"adaptive step underflow: {res.message}")
    meta = {"integrator": "DOP853", "rel_tol": cfg.rel_tol, "abs_tol": cfg.abs_tol,
            "t_end": float(t_end)}
    return Trajectory(res.t, res.y.T, meta=meta, dense=res.sol)


def flow_map(sys: QuadraticSystem, u0, tau: float, cfg: IntegratorConfig | None = None) -> np.ndarray:
    """The propagator ``F_tau(u0) = u(tau)``."""
    u0 = _check_u0(sys, u0)
    if tau < 0:
        raise ContractError(f"tau must be non-negative, got {tau}")
    if tau == 0:
        return u0.copy()
    cfg = cfg or IntegratorConfig()
    traj = integrate_reference(sys, u0, tau, IntegratorConfig(
        cfg.rel_tol, cfg.abs_tol, cfg.max_step, False, cfg.blowup_norm))
    return traj.states[-1].copy()
