"""Distinguishability of amplitude-encoded solutions and trajectory separation.

A solution vector ``u`` is represented by its unit direction ``u / ||u||``.
Two such states with overlap ``1 - eps`` need more than ``1 / (10 eps)``
copies before their ``k``-fold trace distance reaches ``1 / sqrt(5)``.
The rest of the module measures how quickly nearby trajectories separate
(finite-time Lyapunov exponent) and evaluates the constants of the
sub-exponential norm / separation ratio bound.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DomainError, GeometryError, UndefinedEncodingError
from .io import write_csv
from .quadratic_ode import QuadraticSystem
from .reference import IntegratorConfig, integrate_reference


@dataclass(frozen=True)
class AmplitudeEncoding:
    components: np.ndarray
    norm: float


def amplitude_encode(u) -> AmplitudeEncoding:
    """Unit direction of ``u`` together with the discarded norm."""
    u = np.asarray(u, dtype=float)
    norm = float(np.linalg.norm(u))
    if norm == 0.0 or not math.isfinite(norm):
        raise UndefinedEncodingError("cannot amplitude-encode a zero or non-finite vector")
    return AmplitudeEncoding(u / norm, norm)


def overlap(ua, ub) -> float:
    """Cosine of the angle between ``ua`` and ``ub``."""
    a = amplitude_encode(ua).components
    b = amplitude_encode(ub).components
    return float(np.clip(a @ b, -1.0, 1.0))


def overlap_from_norms(norm_a: float, norm_b: float, separation: float) -> float:
    """Overlap implied by two norms and their separation (law of cosines)."""
    if not (norm_a > 0 and norm_b > 0):
        raise GeometryError("norms must be positive")
    slack = 1e-12 * (norm_a + norm_b)
    if not abs(norm_a - norm_b) - slack <= separation <= norm_a + norm_b + slack:
        raise GeometryError(
            f"separation {separation} incompatible with norms {norm_a}, {norm_b}")
    cos = (norm_a**2 + norm_b**2 - separation**2) / (2 * norm_a * norm_b)
    return float(np.clip(cos, -1.0, 1.0))


def trace_distance_pure(overlap_mag: float, k: int = 1) -> float:
    """Trace distance between ``k`` copies of two pure states."""
    if not 0.0 <= overlap_mag <= 1.0:
        raise DomainError(f"overlap magnitude must lie in [0, 1], got {overlap_mag}")
    if k < 1:
        raise DomainError(f"k must be a positive integer, got {k}")
    return math.sqrt(max(0.0, 1.0 - overlap_mag ** (2 * k)))


def query_lower_bound(epsilon: float) -> int:
    """Smallest integer ``k`` with ``k > 1 / (10 epsilon)``."""
    if not 0.0 < epsilon < 1.0:
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")
    x = 1.0 / (10.0 * epsilon)
    # 1/(10*0.004) can land a hair below 25; snap near-integers first.
    nearest = round(x)
    if abs(x - nearest) <= 1e-9 * max(1.0, x):
        return int(nearest) + 1
    return int(math.floor(x)) + 1


@dataclass
class OverlapReport:
    times: np.ndarray
    overlaps: np.ndarray
    trace_distances: np.ndarray
    copies: int
    epsilon: float
    k_min: int | None

    def to_csv(self, path):
        return write_csv(path, ["t", "overlap", "trace_distance"],
                         [self.times, self.overlaps, self.trace_distances])

    def summary(self) -> dict:
        return {"epsilon": self.epsilon, "k_min": self.k_min, "copies": self.copies,
                "final_overlap": float(self.overlaps[-1]),
                "min_abs_overlap": float(np.abs(self.overlaps).min())}


def overlap_report(times, states_a, states_b, copies: int = 1) -> OverlapReport:
    """Overlaps and ``copies``-fold trace distances along two trajectories."""
    states_a = np.atleast_2d(states_a)
    states_b = np.atleast_2d(states_b)
    if states_a.shape != states_b.shape or states_a.shape[0] != len(times):
        raise ContractError("trajectory shapes do not match")
    ov = np.array([overlap(a, b) for a, b in zip(states_a, states_b)])
    td = np.array([trace_distance_pure(min(abs(o), 1.0), copies) for o in ov])
    eps = 1.0 - abs(ov[0])
    k_min = query_lower_bound(eps) if 0.0 < eps < 1.0 else None
    return OverlapReport(np.asarray(times, dtype=float), ov, td, copies, eps, k_min)


# -- finite-time Lyapunov exponent -------------------------------------------


@dataclass
class LyapunovEstimate:
    """Slope of log mean separation over the exponential-growth window."""

    lambda_t: float
    fit_window: tuple[float, float]
    n_samples: int
    perturbation_norm: float
    r_squared: float
    times: np.ndarray
    mean_separation: np.ndarray
    intercept: float = 0.0
    chaotic: bool = False
    attractor_diameter: float = float("nan")
    seed: int = 0
    sample_separations: np.ndarray | None = field(default=None, repr=False)

    def to_csv(self, path):
        return write_csv(path, ["t", "mean_separation"], [self.times, self.mean_separation])

    def summary(self) -> dict:
        return {"lambda_t": self.lambda_t, "fit_window": list(self.fit_window),
                "r_squared": self.r_squared, "n_samples": self.n_samples,
                "perturbation_norm": self.perturbation_norm, "intercept": self.intercept,
                "chaotic": self.chaotic, "attractor_diameter": self.attractor_diameter,
                "seed": self.seed}


def perturbation(seed: int, index: int, dim: int, norm: float) -> np.ndarray:
    """Direction drawn uniformly on the sphere, seeded by ``(seed, index)``."""
    rng = np.random.default_rng([seed, index])
    d = rng.standard_normal(dim)
    return d * (norm / np.linalg.norm(d))


def _sample_separation(args):
    sys, u0, base, grid, cfg, seed, index, pert = args
    v0 = u0 + perturbation(seed, index, sys.dim, pert)
    other = integrate_reference(sys, v0, grid[-1], cfg, t_eval=grid).states
    return np.linalg.norm(other - base, axis=1)


def _linear_fit(t, y):
    n = t.size
    tm, ym = t.mean(), y.mean()
    sxx = np.sum((t - tm) ** 2)
    sxy = np.sum((t - tm) * (y - ym))
    syy = np.sum((y - ym) ** 2)
    slope = sxy / sxx
    r2 = sxy**2 / (sxx * syy) if syy > 0 else 0.0
    return slope, ym - slope * tm, float(min(r2, 1.0)), n


def find_exponential_window(times, separation, ceiling: float, r2_min: float = 0.98,
                            min_points: int = 10, max_candidates: int = 400):
    """Longest window where ``log(separation)`` is linear with ``r^2 >= r2_min``.

    Every point in the window must satisfy ``0 < separation < ceiling``.
    Window edges are restricted to a grid of at most ``max_candidates``
    points. Returns ``(i, j, found)`` with inclusive sample indices; when no
    window reaches ``r2_min`` the window with the best ``r^2`` is returned
    with ``found = False``.
    """
    t = np.asarray(times, dtype=float)
    s = np.asarray(separation, dtype=float)
    ok = (s > 0) & (s < ceiling) & np.isfinite(s)
    y = np.where(ok, np.log(np.where(ok, s, 1.0)), 0.0)

    def prefix(a):
        return np.concatenate([[0.0], np.cumsum(a)])

    c1, ct, cy = prefix(np.ones_like(t)), prefix(t), prefix(y)
    ctt, cty, cyy = prefix(t * t), prefix(t * y), prefix(y * y)
    cbad = prefix(~ok)
    stride = max(1, int(math.ceil(t.size / max_candidates)))
    edges = np.unique(np.r_[np.arange(0, t.size, stride), t.size - 1])

    best = None          # (length, r2, i, j) meeting r2_min
    fallback = None      # (r2, length, i, j) best r2 overall
    for a, i in enumerate(edges[:-1]):
        j = edges[a + 1:]
        hi = j + 1
        n = c1[hi] - c1[i]
        keep = (n >= min_points) & (cbad[hi] - cbad[i] == 0)
        if not keep.any():
            continue
        j, hi, n = j[keep], hi[keep], n[keep]
        sx, sy = ct[hi] - ct[i], cy[hi] - cy[i]
        sxx = ctt[hi] - ctt[i] - sx * sx / n
        sxy = cty[hi] - cty[i] - sx * sy / n
        syy = cyy[hi] - cyy[i] - sy * sy / n
        with np.errstate(divide="ignore", invalid="ignore"):
            r2 = np.where(syy > 1e-300, sxy**2 / (sxx * syy), 0.0)
        length = t[j] - t[i]
        q = int(np.argmax(r2))
        if fallback is None or r2[q] > fallback[0]:
            fallback = (float(r2[q]), float(length[q]), int(i), int(j[q]))
        good = r2 >= r2_min
        if good.any():
            cand = np.flatnonzero(good)
            q = cand[np.lexsort((r2[cand], length[cand]))[-1]]
            key = (float(length[q]), float(r2[q]))
            if best is None or key > best[:2]:
                best = (key[0], key[1], int(i), int(j[q]))
    if best is not None:
        return best[2], best[3], True
    if fallback is None:
        raise ContractError("separation curve has no usable window")
    return fallback[2], fallback[3], False


def lyapunov_estimate(sys: QuadraticSystem, u0, perturbation_norm: float = 1e-8,
                      n_samples: int = 100, seed: int = 0, t_end: float = 400.0,
                      cfg: IntegratorConfig | None = None, *, stride: float = 0.1,
                      window: tuple[float, float] | None = None, workers: int = 1,
                      r2_min: float = 0.98, saturation_fraction: float = 0.1,
                      keep_samples: bool = False) -> LyapunovEstimate:
    """Ensemble-averaged finite-time Lyapunov exponent from ``u0``.

    Each sample perturbs ``u0`` by ``perturbation_norm`` in a random
    direction seeded by ``(seed, index)``, so results do not depend on
    ``workers``. Separations are averaged over samples on a grid of spacing
    ``stride``, and ``log(mean separation)`` is fitted linearly over
    ``window`` or, by default, over the longest window with
    ``r^2 >= r2_min`` in which the separation stays below
    ``saturation_fraction`` of the attractor diameter (the largest
    coordinate range of the unperturbed trajectory).
    """
    u0 = np.asarray(u0, dtype=float)
    if n_samples < 1:
        raise ContractError("n_samples must be >= 1")
    if not perturbation_norm > 0:
        raise ContractError("perturbation_norm must be positive")
    cfg = cfg or IntegratorConfig()
    m = max(1, int(round(t_end / stride)))
    grid = stride * np.arange(m + 1)
    base = integrate_reference(sys, u0, grid[-1], cfg, t_eval=grid).states
    diameter = float(np.max(base.max(axis=0) - base.min(axis=0)))

    jobs = [(sys, u0, base, grid, cfg, seed, i, perturbation_norm) for i in range(n_samples)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            seps = list(pool.map(_sample_separation, jobs))
    else:
        seps = [_sample_separation(job) for job in jobs]
    seps = np.array(seps)
    mean_sep = seps.mean(axis=0)

    if window is not None:
        t_a, t_b = window
        if not t_a < t_b:
            raise ContractError("fit window must satisfy t_a < t_b")
        i = int(np.searchsorted(grid, t_a - 1e-12))
        j = int(np.searchsorted(grid, t_b + 1e-12)) - 1
        found = True
    else:
        i, j, found = find_exponential_window(
            grid, mean_sep, saturation_fraction * diameter, r2_min)
    sl = slice(i, j + 1)
    slope, intercept, r2, _ = _linear_fit(grid[sl], np.log(mean_sep[sl]))
    found = found and r2 >= r2_min
    return LyapunovEstimate(
        lambda_t=float(slope), fit_window=(round(float(grid[i]), 10), round(float(grid[j]), 10)),
        n_samples=n_samples, perturbation_norm=perturbation_norm, r_squared=r2,
        times=grid, mean_separation=mean_sep, intercept=float(intercept),
        chaotic=bool(found and slope > 0), attractor_diameter=diameter, seed=seed,
        sample_separations=seps if keep_samples else None)


# -- sub-exponential growth bound ----------------------------------------------


@dataclass(frozen=True)
class DecayBound:
    """Constants bounding ``||u(t)|| / ||delta u(t)||``.

    With ``||u(t)|| <= exp(t**(1 - alpha))`` and separation growing as
    ``sep0 * exp(lambda_t t)``, the ratio is at most
    ``exp(t**(1-alpha) - lambda_t t) / sep0``, which peaks at ``t_max`` and
    is dominated after ``2 t_c`` by ``bound(t)``.
    """

    alpha: float
    lambda_t: float
    sep0: float
    t_max: float
    r_max: float
    t_c: float
    c: float

    @property
    def decay_rate(self) -> float:
        return self.lambda_t * (1.0 - 2.0 ** (-self.alpha))

    def bound(self, t):
        return self.c / self.sep0 * np.exp(-self.decay_rate * np.asarray(t, dtype=float))

    def ratio_bound(self, t):
        """The raw bound ``exp(t**(1-alpha)) / (sep0 exp(lambda_t t))``."""
        t = np.asarray(t, dtype=float)
        return np.exp(t ** (1.0 - self.alpha) - self.lambda_t * t) / self.sep0

    def crossing_time(self) -> float:
        """Time at which ``bound(t)`` falls to 1."""
        return math.log(self.c / self.sep0) / self.decay_rate


def decay_bound_constants(alpha: float, lambda_t: float, sep0: float) -> DecayBound:
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    if not lambda_t > 0:
        raise DomainError(f"lambda_t must be positive, got {lambda_t}")
    if not sep0 > 0:
        raise DomainError(f"sep0 must be positive, got {sep0}")
    t_max = ((1.0 - alpha) / lambda_t) ** (1.0 / alpha)
    peak_exp = -t_max * (lambda_t - t_max ** (-alpha))
    shift = 2.0 * lambda_t ** (1.0 - 1.0 / alpha) * (1.0 - 2.0 ** (-alpha))
    return DecayBound(alpha, lambda_t, sep0, t_max=t_max, r_max=math.exp(peak_exp) / sep0,
                      t_c=lambda_t ** (-1.0 / alpha), c=math.exp(peak_exp + shift))
