"""A chaotic quadratic flow whose linear part is strictly stable.

    dx/dt = y
    dy/dt = z
    dz/dt = -x - (1 - k) y - z - 2.3 z**2 + x y + k,     -1 <= k < 0

The fixed point ``(k, 0, 0)`` is stable, yet trajectories started from
``(k - 1, 0, 0)`` are chaotic. A small kick along the real (decaying)
eigenvector of ``F1`` instead relaxes smoothly back to the fixed point.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .analytics import LyapunovEstimate, lyapunov_estimate
from .carleman import ErrorCurve, reference_on_grid, truncation_error
from .errors import DomainError, NumericalError
from .quadratic_ode import QuadraticSystem, reynolds_like_r, rhs_eval, spectral_report
from .reference import IntegratorConfig, integrate_reference
from .trajectory import Trajectory

DEFAULT_K = -1e-4
DEFAULT_XI = 5e-3
#: ``4 * ||F2||`` rounded as in the closed-form R expression.
R_COEFF = 10.04


@dataclass(frozen=True)
class ChaosParams:
    k: float = DEFAULT_K
    xi: float = DEFAULT_XI

    def __post_init__(self):
        _check_k(self.k)
        if not self.xi > 0:
            raise DomainError(f"xi must be positive, got {self.xi}")


def _check_k(k):
    if not -1.0 <= k < 0.0:
        raise DomainError(f"k must lie in [-1, 0), got {k}")


def build_chaos_system(k: float = DEFAULT_K) -> QuadraticSystem:
    _check_k(k)
    x, y, z = 0, 1, 2
    f1 = [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [-1.0, k - 1.0, -1.0]]
    # single-entry cross term: coefficient 1 on x⊗y only
    return QuadraticSystem(3, [z, z], [3 * z + z, 3 * x + y], [-2.3, 1.0], f1, [0.0, 0.0, k],
                           name=f"chaos(k={k:g})")


def fixed_point(k: float = DEFAULT_K) -> np.ndarray:
    fp = np.array([k, 0.0, 0.0])
    resid = np.linalg.norm(rhs_eval(build_chaos_system(k), fp))
    if resid >= 1e-14:
        raise NumericalError(f"fixed point residual {resid:g}")
    return fp


def decaying_eigenvector(k: float = DEFAULT_K):
    """``(lambda_1, v_1)``: the real eigenpair of ``F1``, unit norm, ``v_1[0] > 0``."""
    f1 = build_chaos_system(k).f1
    try:
        vals, vecs = np.linalg.eig(f1)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition failed: {exc}") from exc
    i = int(np.argmin(np.abs(vals.imag)))
    if abs(vals[i].imag) > 1e-12:
        raise NumericalError("F1 has no real eigenvalue")
    v = vecs[:, i].real
    v = v / np.linalg.norm(v)
    if v[0] < 0:
        v = -v
    return float(vals[i].real), v


def initial_conditions(k: float = DEFAULT_K, xi: float = DEFAULT_XI):
    """``(u_chaos, u_decay)``."""
    ChaosParams(k, xi)
    _, v1 = decaying_eigenvector(k)
    u_chaos = np.array([k - 1.0, 0.0, 0.0])
    u_decay = np.array([k, 0.0, 0.0]) + xi * v1
    return u_chaos, u_decay


def r_formula(k: float, u0) -> float:
    """Closed-form R using ``|Re lambda_2| ~ |k|/4``, ``||F2|| ~ 2.51``, ``||F0|| = |k|``.

    The forcing term is ``||F0|| / (||u0|| |Re lambda_2|) = 4 / ||u0||``.
    """
    _check_k(k)
    nu = float(np.linalg.norm(u0))
    if nu == 0:
        raise DomainError("R is undefined for a zero initial condition")
    return R_COEFF / abs(k) * nu + 4.0 / nu


def summary(k: float = DEFAULT_K, xi: float = DEFAULT_XI) -> dict:
    """Spectral data and R values for both initial conditions."""
    sys = build_chaos_system(k)
    rep = spectral_report(sys)
    u_chaos, u_decay = initial_conditions(k, xi)
    lam1, v1 = decaying_eigenvector(k)
    return {
        "k": k, "xi": xi,
        "f2_norm": rep.f2_spectral_norm, "f0_norm": float(np.linalg.norm(sys.f0)),
        "max_real_part": rep.max_real_part, "dissipative": rep.dissipative,
        "eigenvalues_real": rep.eigenvalues_f1.real, "eigenvalues_imag": rep.eigenvalues_f1.imag,
        "lambda_1": lam1, "v_1": v1,
        "u_chaos": u_chaos, "u_decay": u_decay,
        "R_chaos": reynolds_like_r(sys, u_chaos), "R_decay": reynolds_like_r(sys, u_decay),
        "R_chaos_formula": r_formula(k, u_chaos), "R_decay_formula": r_formula(k, u_decay),
    }


@dataclass
class Fig2Result:
    trajectory: Trajectory
    lyapunov: LyapunovEstimate

    def summary(self) -> dict:
        s = self.trajectory.states
        return {"lyapunov": self.lyapunov.summary(),
                "max_norm": float(np.linalg.norm(s, axis=1).max()),
                "extent_min": s.min(axis=0), "extent_max": s.max(axis=0)}


def run_fig2(k: float = DEFAULT_K, seed: int = 0, *, n_samples: int = 100,
             perturbation_norm: float = 1e-8, t_end: float = 400.0, stride: float = 0.1,
             workers: int = 1, cfg: IntegratorConfig | None = None) -> Fig2Result:
    """Chaotic trajectory to ``t_end`` plus the ensemble Lyapunov estimate."""
    sys = build_chaos_system(k)
    u_chaos, _ = initial_conditions(k)
    m = int(round(t_end / stride))
    grid = stride * np.arange(m + 1)
    traj = integrate_reference(sys, u_chaos, grid[-1], cfg, t_eval=grid)
    est = lyapunov_estimate(sys, u_chaos, perturbation_norm, n_samples, seed, t_end, cfg,
                            stride=stride, workers=workers)
    return Fig2Result(Trajectory(traj.times, traj.states, meta=traj.meta), est)


@dataclass
class Fig34Result:
    k: float
    dt: float
    t_end: float
    c_max: int
    #: keyed by ``(scheme, initial condition, C)``
    curves: dict = field(default_factory=dict)
    references: dict = field(default_factory=dict)

    def max_errors(self, scheme: str, ic: str) -> list[float]:
        return [self.curves[scheme, ic, c].max_error for c in range(1, self.c_max + 1)]

    def summary(self) -> dict:
        out = {"k": self.k, "dt": self.dt, "t_end": self.t_end, "c_max": self.c_max}
        for (scheme, ic, c), curve in sorted(self.curves.items()):
            out.setdefault(scheme, {}).setdefault(ic, {})[f"C{c}"] = {
                "max_error": curve.max_error, "final_error": float(curve.err[-1]),
                "diverged": curve.diverged, "blowup_time": curve.blowup_time}
        return out


def run_fig34(k: float = DEFAULT_K, c_max: int = 5, dt: float = 1e-3, t_end: float = 10.0, *,
              xi: float = DEFAULT_XI, schemes=("euler", "expm"),
              cfg: IntegratorConfig | None = None) -> Fig34Result:
    """Truncation error for ``C = 1..c_max`` from both initial conditions.

    ``"euler"`` curves include forward-Euler discretisation error, which at
    ``dt = 1e-3`` floors the decay-case error near ``1e-6``; ``"expm"`` curves
    step the truncated system exactly and show the truncation error alone.
    """
    sys = build_chaos_system(k)
    u_chaos, u_decay = initial_conditions(k, xi)
    res = Fig34Result(k, dt, t_end, c_max)
    for ic, u0 in (("chaos", u_chaos), ("decay", u_decay)):
        ref = reference_on_grid(sys, u0, dt, t_end, cfg)
        res.references[ic] = ref
        for scheme in schemes:
            for c in range(1, c_max + 1):
                res.curves[scheme, ic, c] = truncation_error(sys, u0, c, dt, t_end, ref, scheme)
    return res


def decay_error_ordering(result: Fig34Result, scheme: str = "expm", c_from: int = 2) -> bool:
    """Max decay-case error strictly decreasing for ``C = c_from..c_max``."""
    e = result.max_errors(scheme, "decay")[c_from - 1:]
    return all(b < a for a, b in zip(e, e[1:]))


def chaos_error_ratio(result: Fig34Result, scheme: str = "expm") -> list[float]:
    """Per-C ratio of the chaotic-case to decay-case max error."""
    chaos = result.max_errors(scheme, "chaos")
    decay = result.max_errors(scheme, "decay")
    return [a / b for a, b in zip(chaos, decay)]


def curves_as_error(result: Fig34Result, scheme: str, ic: str) -> list[ErrorCurve]:
    return [result.curves[scheme, ic, c] for c in range(1, result.c_max + 1)]
