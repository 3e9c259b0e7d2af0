"""Lp-norm-bounded reachable sets via costate-parameterized optimal controls.

Each costate initial condition lambda0 induces the optimal control
u(t) = (-B^T e^{-A^T t} lambda0)^{1/(p-1)} (even p, elementwise odd root).
Sweeping lambda0 over a grid maps out terminal states together with their
optimal signal cost, which labels each endpoint as inside or outside the
budget. A Holder-type bound on ||lambda0||_q^q gives a cheap sufficient
filter for endpoints guaranteed to be reachable.
"""

import csv
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.stats import norm as _gaussian
from scipy.stats.qmc import Halton as _Halton

from .errors import DimensionError
from .geometry import Polytope, convex_hull
from .lti import LtiSystem, expm_grid, matrix_exponential

__all__ = [
    "LpSpec",
    "LpOptimalControl",
    "CostateSample",
    "LpReachCloud",
    "lp_optimal_control",
    "costate_grid",
    "sample_reach",
    "prop2_bound",
    "inner_approx",
    "cloud_to_csv",
    "simpson_weights",
]

DEFAULT_NODES = 2001

# slack on the budget comparison when labeling endpoints reachable
REACHABLE_SLACK = 1e-12


@dataclass(frozen=True)
class LpSpec:
    """Signal-norm budget: ||u||_{Lp} <= budget over horizon T, p even."""

    p: int
    T: float
    budget: float = 1.0

    def __post_init__(self):
        if self.p < 2 or self.p % 2 != 0:
            raise ValueError(f"p must be an even integer >= 2, got {self.p}")
        if self.T <= 0:
            raise ValueError(f"horizon must be positive, got {self.T}")
        if self.budget <= 0:
            raise ValueError(f"budget must be positive, got {self.budget}")

    @property
    def q(self) -> float:
        return self.p / (self.p - 1)


def _signed_root(z: np.ndarray, p: int) -> np.ndarray:
    # odd (p-1)-th root, sign preserving
    return np.sign(z) * np.abs(z) ** (1.0 / (p - 1))


@dataclass
class LpOptimalControl:
    """Costate-parameterized optimal control sampled on a uniform grid."""

    A: np.ndarray
    B: np.ndarray
    lambda0: np.ndarray
    p: int
    times: np.ndarray
    values: np.ndarray

    def __call__(self, t):
        z = -self.B.T @ (matrix_exponential(-self.A.T, t) @ self.lambda0)
        return _signed_root(z, self.p)


@dataclass
class CostateSample:
    """One costate draw: terminal point, optimal cost, and budget labels."""

    lambda0: np.ndarray
    endpoint: np.ndarray
    cost_p: float
    reachable: bool
    within_prop2_bound: bool


@dataclass
class LpReachCloud:
    """Costate sweep results plus the hull of the affordable endpoints."""

    samples: list
    spec: LpSpec
    hull: Polytope | None

    def reachable_endpoints(self) -> np.ndarray:
        pts = [s.endpoint for s in self.samples if s.reachable]
        if not pts:
            return np.zeros((0, 0))
        return np.stack(pts)

    def endpoints(self) -> np.ndarray:
        return np.stack([s.endpoint for s in self.samples])

    def nearest_sample(self, xf) -> CostateSample:
        """Sample whose endpoint is closest to the queried state."""
        if not self.samples:
            raise ValueError("cloud has no samples")
        xf = np.asarray(xf, dtype=float)
        dists = np.linalg.norm(self.endpoints() - xf, axis=1)
        return self.samples[int(np.argmin(dists))]


def simpson_weights(num: int, T: float) -> np.ndarray:
    """Composite Simpson weights on num (odd, >= 3) uniform nodes over [0, T]."""
    if num < 3 or num % 2 == 0:
        raise ValueError(f"Simpson rule needs an odd node count >= 3, got {num}")
    h = T / (num - 1)
    w = np.full(num, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return w * (h / 3.0)


def lp_optimal_control(
    sys: LtiSystem, lambda0, spec: LpSpec, num_points: int = DEFAULT_NODES
) -> LpOptimalControl:
    """Optimal-control candidate for one costate initial condition.

    The returned object evaluates the closed form at arbitrary times and
    carries samples on a uniform num_points grid over [0, T].
    """
    lambda0 = np.asarray(lambda0, dtype=float)
    if lambda0.shape != (sys.n,):
        raise DimensionError(f"lambda0 must have shape ({sys.n},), got {lambda0.shape}")
    times = np.linspace(0.0, spec.T, num_points)
    mats = expm_grid(-sys.A.T, 0.0, spec.T, num_points)
    z = -np.einsum("knj,j->kn", mats, lambda0) @ sys.B
    return LpOptimalControl(
        A=sys.A,
        B=sys.B,
        lambda0=lambda0,
        p=spec.p,
        times=times,
        values=_signed_root(z, spec.p),
    )


@lru_cache(maxsize=16)
def _quadrature_kernels(a_bytes: bytes, b_bytes: bytes, n: int, m: int, T: float, nodes: int):
    """Shared Simpson-node matrices: -B^T e^{-A^T t_j} and e^{A(T-t_j)} B."""
    A = np.frombuffer(a_bytes, dtype=float).reshape(n, n)
    B = np.frombuffer(b_bytes, dtype=float).reshape(n, m)
    decay = expm_grid(-A.T, 0.0, T, nodes)
    pullback = -np.einsum("mn,jnk->jmk", B.T, decay)
    flow = expm_grid(A, T, 0.0, nodes)
    pushforward = np.einsum("jnk,km->jnm", flow, B)
    weights = simpson_weights(nodes, T)
    pullback.flags.writeable = False
    pushforward.flags.writeable = False
    weights.flags.writeable = False
    return pullback, pushforward, weights


def _kernels(sys: LtiSystem, T: float, nodes: int):
    return _quadrature_kernels(
        sys.A.tobytes(), sys.B.tobytes(), sys.n, sys.m, float(T), int(nodes)
    )


def prop2_bound(sys: LtiSystem, spec: LpSpec, nodes: int = DEFAULT_NODES) -> float:
    """Costate-norm radius R guaranteeing budget feasibility.

    Any lambda0 with ||lambda0||_q^q <= R * budget^p yields an optimal
    control whose Lp cost stays within the budget. R is the reciprocal of
    m times the Simpson integral of ||vec(e^{-A tau} B)||_p^q over [0, T].
    """
    decay = expm_grid(-sys.A, 0.0, spec.T, nodes)
    stacked = np.einsum("jnk,km->jnm", decay, sys.B).reshape(nodes, -1)
    vec_norms = np.sum(np.abs(stacked) ** spec.p, axis=1) ** (1.0 / spec.p)
    integral = float(simpson_weights(nodes, spec.T) @ vec_norms**spec.q)
    return 1.0 / (sys.m * integral)


def _build_hull(endpoints: np.ndarray, n: int) -> Polytope | None:
    if len(endpoints) == 0 or not 2 <= n <= 4:
        return None
    return convex_hull(endpoints, dim=n)


def sample_reach(sys: LtiSystem, spec: LpSpec, grid, nodes: int = DEFAULT_NODES) -> LpReachCloud:
    """Sweep a costate grid and label endpoints by optimal signal cost.

    Endpoints and costs come from composite Simpson quadrature of the
    closed-form control, vectorized across the whole grid. The hull is
    built over the budget-feasible endpoints only.
    """
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    if grid.size == 0:
        raise ValueError("costate grid must be nonempty")
    if grid.shape[1] != sys.n:
        raise DimensionError(f"grid rows must have dimension {sys.n}, got {grid.shape[1]}")
    pullback, pushforward, weights = _kernels(sys, spec.T, nodes)
    controls = _signed_root(np.einsum("jmn,ln->ljm", pullback, grid), spec.p)
    endpoints = np.einsum("j,jnm,ljm->ln", weights, pushforward, controls)
    costs = np.einsum("j,ljm->l", weights, np.abs(controls) ** spec.p)
    radius = prop2_bound(sys, spec, nodes)
    budget_p = spec.budget**spec.p
    lam_norms = np.sum(np.abs(grid) ** spec.q, axis=1)
    samples = [
        CostateSample(
            lambda0=grid[i],
            endpoint=endpoints[i],
            cost_p=float(costs[i]),
            reachable=bool(costs[i] <= budget_p + REACHABLE_SLACK),
            within_prop2_bound=bool(lam_norms[i] <= radius * budget_p),
        )
        for i in range(len(grid))
    ]
    reachable_pts = endpoints[[s.reachable for s in samples]]
    return LpReachCloud(samples=samples, spec=spec, hull=_build_hull(reachable_pts, sys.n))


def inner_approx(sys: LtiSystem, spec: LpSpec, grid, nodes: int = DEFAULT_NODES) -> LpReachCloud:
    """Restrict the sweep to costates certified by the norm-radius filter.

    Every surviving sample is guaranteed budget-feasible, so the resulting
    cloud is an inner approximation of the reachable set. An empty filter
    result is valid and produces an empty cloud.
    """
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    if grid.size == 0:
        raise ValueError("costate grid must be nonempty")
    radius = prop2_bound(sys, spec, nodes)
    lam_norms = np.sum(np.abs(grid) ** spec.q, axis=1)
    kept = grid[lam_norms <= radius * spec.budget**spec.p]
    if len(kept) == 0:
        return LpReachCloud(samples=[], spec=spec, hull=None)
    return sample_reach(sys, spec, kept, nodes)


def _sphere_directions(n: int, count: int) -> np.ndarray:
    if n == 2:
        angles = 2.0 * np.pi * np.arange(count) / count
        return np.column_stack([np.cos(angles), np.sin(angles)])
    sampler = _Halton(d=n, scramble=False)
    raw = sampler.random(count + 16)
    raw = raw[np.all((raw > 1e-9) & (raw < 1.0 - 1e-9), axis=1)]
    gauss = _gaussian.ppf(raw)
    norms = np.linalg.norm(gauss, axis=1)
    gauss = gauss[norms > 1e-12]
    dirs = gauss / np.linalg.norm(gauss, axis=1, keepdims=True)
    return dirs[:count]


def costate_grid(n: int, magnitudes, directions_per_shell: int) -> np.ndarray:
    """Deterministic costate grid of radius shells times sphere directions.

    Each shell of radius r contributes the 2n axis-aligned points +-r e_i
    plus directions_per_shell low-discrepancy unit directions scaled by r
    (uniform angles for n = 2, Halton-Gaussian for higher n). Exact
    duplicates collapse to their first occurrence.
    """
    magnitudes = np.atleast_1d(np.asarray(magnitudes, dtype=float))
    if np.any(magnitudes <= 0) or np.any(np.diff(magnitudes) < 0):
        raise ValueError("magnitudes must be positive and ascending")
    if directions_per_shell < 1:
        raise ValueError("directions_per_shell must be >= 1")
    dirs = _sphere_directions(n, directions_per_shell)
    corners = np.vstack([np.eye(n), -np.eye(n)])
    points = []
    seen = set()
    for r in magnitudes:
        for block in (r * corners, r * dirs):
            for row in block:
                key = row.tobytes()
                if key not in seen:
                    seen.add(key)
                    points.append(row)
    return np.array(points)


def cloud_to_csv(cloud: LpReachCloud, path_or_file) -> None:
    """Write samples as CSV: costate, endpoint, cost, and budget labels."""
    if not cloud.samples:
        n = 0
    else:
        n = len(cloud.samples[0].lambda0)
    header = (
        [f"lambda0_{i + 1}" for i in range(n)]
        + [f"xf_{i + 1}" for i in range(n)]
        + ["cost_p", "reachable", "within_prop2_bound"]
    )

    def emit(fh):
        writer = csv.writer(fh)
        writer.writerow(header)
        for s in cloud.samples:
            writer.writerow(
                [repr(float(v)) for v in s.lambda0]
                + [repr(float(v)) for v in s.endpoint]
                + [repr(s.cost_p), str(s.reachable).lower(), str(s.within_prop2_bound).lower()]
            )

    if hasattr(path_or_file, "write"):
        emit(path_or_file)
    else:
        with open(path_or_file, "w", newline="") as fh:
            emit(fh)
