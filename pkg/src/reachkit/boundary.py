"""Boundary of the magnitude-bounded reachable set for planar single-input
systems, via switching controls, plus switching-function analysis for
general systems.
"""

import csv
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import DimensionError, UnsupportedConfigurationError
from .geometry import Polytope, convex_hull
from .lti import (
    LtiSystem,
    PiecewiseConstantControl,
    classify_spectrum,
    convolution_integral,
    expm_grid,
    matrix_exponential,
)

__all__ = [
    "ControlBounds",
    "BoundaryCurve",
    "SwitchReport",
    "switching_function",
    "bang_bang_control",
    "switch_count",
    "boundary_curve",
    "reach_hull_planar",
    "boundary_curve_to_csv",
]

# bracket scan resolution for locating switching-function zeros
SCAN_RESOLUTION = 1e-6


@dataclass
class ControlBounds:
    """Componentwise input box: lower[i] <= u_i <= upper[i]."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        self.upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if self.lower.shape != self.upper.shape:
            raise DimensionError("lower and upper must have equal length")
        if not (np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper))):
            raise ValueError("bounds must be finite")
        if np.any(self.lower > self.upper):
            raise ValueError("need lower <= upper componentwise")

    @classmethod
    def symmetric(cls, magnitude: float, m: int = 1) -> "ControlBounds":
        mag = abs(float(magnitude))
        return cls(lower=-mag * np.ones(m), upper=mag * np.ones(m))

    @property
    def m(self) -> int:
        return len(self.lower)


@dataclass
class BoundaryCurve:
    """Discretized switching-parameterized boundary curves.

    g1[k] is the endpoint of the control that starts at the upper bound and
    drops to the lower bound at etas[k]; g2[k] swaps the two levels. For
    qualifying systems (planar, real distinct eigenvalues, single input)
    the hull of the two curves is the exact reachable set; exact records
    whether that guarantee applies.
    """

    etas: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    horizon: float
    exact: bool

    @property
    def n(self) -> int:
        return self.g1.shape[1]


@dataclass
class SwitchReport:
    """Per-channel strict sign-change counts of the switching function."""

    sign_changes: np.ndarray
    identically_zero: np.ndarray
    grid_points: int


def switching_function(sys: LtiSystem, c, T: float, t: float) -> np.ndarray:
    """psi(t; c) = c^T e^{A (T - t)} B, one entry per input channel."""
    c = np.asarray(c, dtype=float)
    if c.shape != (sys.n,):
        raise DimensionError(f"c must have shape ({sys.n},), got {c.shape}")
    return (c @ matrix_exponential(sys.A, T - t)) @ sys.B


def _switching_grid(sys: LtiSystem, c, T: float, num: int):
    """psi on a uniform time grid, shape (num, m), plus the grid itself."""
    c = np.asarray(c, dtype=float)
    # e^{A (T - t_k)} for t_k ascending equals e^{A s} for s descending
    mats = expm_grid(sys.A, T, 0.0, num)
    psi = np.einsum("n,knj,jm->km", c, mats, sys.B, optimize=True)
    return np.linspace(0.0, T, num), psi


def _refine_zero(sys, c, T, i, a, b):
    f = lambda t: float(switching_function(sys, c, T, t)[i])
    fa, fb = f(a), f(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if fa * fb > 0.0:
        # grid-level sign change not confirmed by exact evaluation
        return 0.5 * (a + b)
    return float(brentq(f, a, b, xtol=1e-15, rtol=4.0 * np.finfo(float).eps))


def _channel_sign_changes(values: np.ndarray):
    """Index pairs (j, k) of consecutive nonzero samples with opposite sign."""
    signs = np.sign(values)
    nz = np.flatnonzero(signs)
    if len(nz) < 2:
        return []
    flips = np.flatnonzero(signs[nz[1:]] * signs[nz[:-1]] < 0)
    return [(int(nz[j]), int(nz[j + 1])) for j in flips]


def bang_bang_control(
    sys: LtiSystem, bounds: ControlBounds, c, T: float, scan_resolution: float = SCAN_RESOLUTION
) -> PiecewiseConstantControl:
    """Saturated control selected by the sign of the switching function.

    Channel i takes upper[i] where psi_i(t; c) >= 0 and lower[i] elsewhere.
    Sign changes are bracketed on a uniform scan grid with spacing
    scan_resolution * T and refined by bisection, so the returned
    breakpoints are accurate to root-finding precision.
    """
    c = np.asarray(c, dtype=float)
    if not np.any(c):
        raise ValueError("c must be nonzero")
    if bounds.m != sys.m:
        raise DimensionError(f"bounds have {bounds.m} channels, system has {sys.m}")
    num = int(round(1.0 / scan_resolution)) + 1
    grid, psi = _switching_grid(sys, c, T, num)

    switch_times = []
    for i in range(sys.m):
        for j, k in _channel_sign_changes(psi[:, i]):
            switch_times.append(_refine_zero(sys, c, T, i, grid[j], grid[k]))
    switch_times = np.array(sorted(switch_times))
    if len(switch_times) > 1:
        keep = np.concatenate([[True], np.diff(switch_times) > 1e-12 * max(T, 1.0)])
        switch_times = switch_times[keep]

    edges = np.concatenate([[0.0], switch_times, [T]])
    mids = 0.5 * (edges[:-1] + edges[1:])
    values = np.empty((len(mids), sys.m))
    for k, tm in enumerate(mids):
        psi_mid = switching_function(sys, c, T, tm)
        values[k] = np.where(psi_mid >= 0.0, bounds.upper, bounds.lower)
    return PiecewiseConstantControl(switch_times=switch_times, values=values, horizon=T)


def switch_count(sys: LtiSystem, c, T: float, grid_points: int) -> SwitchReport:
    """Strict sign changes of each switching-function channel on a grid.

    Channels whose peak magnitude falls below 1e-12 * ||c|| * ||B|| are
    flagged identically zero and counted as zero switches.
    """
    if grid_points < 100:
        raise ValueError("grid_points must be >= 100")
    c = np.asarray(c, dtype=float)
    _, psi = _switching_grid(sys, c, T, grid_points)
    zero_scale = 1e-12 * np.linalg.norm(c) * np.linalg.norm(sys.B, 2)
    identically_zero = np.max(np.abs(psi), axis=0) < zero_scale
    counts = np.zeros(sys.m, dtype=int)
    for i in range(sys.m):
        if not identically_zero[i]:
            counts[i] = len(_channel_sign_changes(psi[:, i]))
    return SwitchReport(
        sign_changes=counts, identically_zero=identically_zero, grid_points=grid_points
    )


def boundary_curve(
    sys: LtiSystem, bounds: ControlBounds, T: float, n_eta: int = 400
) -> BoundaryCurve:
    """Boundary curves of the reachable set under box-bounded input.

    Sweeps the switch time eta over a uniform grid on [0, T] and evaluates
    both one-switch control patterns through exact convolution integrals.
    Requires a single input channel. Systems outside the planar
    real-distinct-eigenvalue class still produce curves, with exact=False
    marking that the exact-boundary guarantee does not apply.
    """
    if sys.m != 1:
        raise UnsupportedConfigurationError(
            f"boundary parameterization needs a single input, got m={sys.m}"
        )
    if bounds.m != 1:
        raise DimensionError("bounds must be scalar for a single-input system")
    if n_eta < 2:
        raise ValueError("n_eta must be >= 2")
    if T <= 0:
        raise ValueError("T must be positive")

    lo = float(bounds.lower[0])
    hi = float(bounds.upper[0])
    etas = np.linspace(0.0, T, n_eta)
    head = np.stack([convolution_integral(sys, T, 0.0, eta)[:, 0] for eta in etas])
    total = head[-1]
    tail = total - head
    g1 = hi * head + lo * tail
    g2 = lo * head + hi * tail
    exact = classify_spectrum(sys).is_planar_real_distinct
    return BoundaryCurve(etas=etas, g1=g1, g2=g2, horizon=T, exact=exact)


def reach_hull_planar(curve: BoundaryCurve) -> Polytope:
    """Convex hull of both boundary curves (planar systems only).

    Hull input stacks g1 then g2, so vertex_indices below len(etas) refer
    to g1 samples and the rest to g2. Collinear curves (motion confined to
    a line) come back as a degenerate segment polytope.
    """
    if curve.n != 2:
        raise DimensionError(f"planar hull needs 2 states, got n={curve.n}")
    return convex_hull(np.vstack([curve.g1, curve.g2]), dim=2)


def boundary_curve_to_csv(curve: BoundaryCurve, path_or_file) -> None:
    """Write the curve samples as CSV: eta, then g1 coords, then g2 coords."""
    header = (
        ["eta"]
        + [f"x{i + 1}_g1" for i in range(curve.n)]
        + [f"x{i + 1}_g2" for i in range(curve.n)]
    )

    def emit(fh):
        writer = csv.writer(fh)
        writer.writerow(header)
        for eta, p1, p2 in zip(curve.etas, curve.g1, curve.g2):
            writer.writerow([repr(float(eta))] + [repr(float(v)) for v in p1]
                            + [repr(float(v)) for v in p2])

    if hasattr(path_or_file, "write"):
        emit(path_or_file)
    else:
        with open(path_or_file, "w", newline="") as fh:
            emit(fh)
