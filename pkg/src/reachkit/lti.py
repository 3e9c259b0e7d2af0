"""Dense LTI primitives: matrix exponentials, exact convolution integrals,
and a fixed-step RK4 integrator used as an independent cross-check.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import expm as _scipy_expm

from .errors import DimensionError, IntervalError, NumericRangeError

__all__ = [
    "LtiSystem",
    "Trajectory",
    "SpectrumClass",
    "PiecewiseConstantControl",
    "matrix_exponential",
    "expm_grid",
    "convolution_integral",
    "simulate",
    "classify_spectrum",
]


class LtiSystem:
    """Linear time-invariant system x' = A x + B u.

    A is n-by-n, B is n-by-m. Matrices are stored as read-only float arrays
    so instances can be shared freely across threads.
    """

    def __init__(self, A, B):
        A = np.array(A, dtype=float)
        B = np.array(B, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DimensionError(f"A must be square, got shape {A.shape}")
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        if B.ndim != 2 or B.shape[0] != A.shape[0]:
            raise DimensionError(
                f"B must have {A.shape[0]} rows, got shape {B.shape}"
            )
        if A.shape[0] < 1 or B.shape[1] < 1:
            raise DimensionError("state and input dimensions must be >= 1")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
            raise ValueError("A and B entries must be finite")
        A.flags.writeable = False
        B.flags.writeable = False
        self.A = A
        self.B = B

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    def __repr__(self):
        return f"LtiSystem(n={self.n}, m={self.m})"


@dataclass
class Trajectory:
    """Sampled solution of an LTI system on an ascending time grid."""

    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        self.controls = np.asarray(self.controls, dtype=float)
        if len(self.times) != len(self.states):
            raise DimensionError("times and states must have equal length")

    @property
    def endpoint(self) -> np.ndarray:
        return self.states[-1]


@dataclass
class SpectrumClass:
    """Eigenvalues of A plus the planar-real-distinct qualification flag."""

    eigenvalues: np.ndarray
    is_planar_real_distinct: bool


@dataclass
class PiecewiseConstantControl:
    """Piecewise-constant control: values[k] holds on [t_k, t_{k+1}).

    switch_times are the interior breakpoints; values has one more row.
    Evaluation is right-continuous at the breakpoints.
    """

    switch_times: np.ndarray
    values: np.ndarray
    horizon: float = field(default=np.inf)

    def __post_init__(self):
        self.switch_times = np.atleast_1d(np.asarray(self.switch_times, dtype=float))
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if self.values.shape[0] != len(self.switch_times) + 1:
            raise DimensionError(
                "need len(switch_times) + 1 value rows, got "
                f"{self.values.shape[0]} rows for {len(self.switch_times)} switches"
            )

    def __call__(self, t):
        idx = np.searchsorted(self.switch_times, t, side="right")
        return self.values[idx]


def matrix_exponential(A, t: float) -> np.ndarray:
    """e^{A t} by scaling-and-squaring with Pade approximants.

    Negative t is allowed. Raises NumericRangeError if the result
    overflows to non-finite values.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"A must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("A entries must be finite")
    if not np.isfinite(t):
        raise ValueError("t must be finite")
    with np.errstate(over="ignore", invalid="ignore"):
        out = _scipy_expm(A * t)
    if not np.all(np.isfinite(out)):
        raise NumericRangeError(f"exp(A t) overflowed for |t| = {abs(t)}")
    return out


_GRID_BLOCK = 64


# a handful of entries covers repeated sweeps; large scan grids are ~30 MB each
@lru_cache(maxsize=8)
def _expm_grid_cached(a_bytes: bytes, n: int, t0: float, t1: float, num: int):
    A = np.frombuffer(a_bytes, dtype=float).reshape(n, n)
    times = np.linspace(t0, t1, num)
    if num <= 2 * _GRID_BLOCK:
        out = np.stack([matrix_exponential(A, t) for t in times])
        out.flags.writeable = False
        return out
    step = (t1 - t0) / (num - 1)
    # in-block powers P[r] = e^{A r step}, r = 0..block-1
    estep = matrix_exponential(A, step)
    powers = np.empty((_GRID_BLOCK, n, n))
    powers[0] = np.eye(n)
    for r in range(1, _GRID_BLOCK):
        powers[r] = powers[r - 1] @ estep
    eblock = powers[-1] @ estep
    nblocks = -(-num // _GRID_BLOCK)
    anchors = np.empty((nblocks, n, n))
    anchors[0] = matrix_exponential(A, t0)
    for k in range(1, nblocks):
        anchors[k] = anchors[k - 1] @ eblock
    out = np.einsum("kij,rjl->kril", anchors, powers)
    out = out.reshape(nblocks * _GRID_BLOCK, n, n)[:num]
    out = np.ascontiguousarray(out)
    out.flags.writeable = False
    return out


def expm_grid(A, t0: float, t1: float, num: int) -> np.ndarray:
    """e^{A t} for t on linspace(t0, t1, num), shape (num, n, n).

    Uses anchored products of a single-step exponential so the cost is
    O(num) small matrix multiplies instead of num full expm calls. Results
    are cached per (A, t0, t1, num) and returned read-only.
    """
    A = np.ascontiguousarray(A, dtype=float)
    if num < 1:
        raise ValueError("num must be >= 1")
    if num == 1:
        out = matrix_exponential(A, t0)[None]
        out.flags.writeable = False
        return out
    return _expm_grid_cached(A.tobytes(), A.shape[0], float(t0), float(t1), int(num))


def convolution_integral(sys: LtiSystem, T: float, t0: float, t1: float) -> np.ndarray:
    """Exact integral of e^{A(T - tau)} B over tau in [t0, t1].

    Computed in closed form: the augmented block matrix [[A, B], [0, 0]]
    is exponentiated over the interval length (its upper-right block is
    the integral of e^{A s} B from 0 to t1 - t0), then composed with
    e^{A (T - t1)}.
    """
    if not (0.0 <= t0 <= t1 <= T):
        raise IntervalError(f"need 0 <= t0 <= t1 <= T, got t0={t0}, t1={t1}, T={T}")
    n, m = sys.n, sys.m
    aug = np.zeros((n + m, n + m))
    aug[:n, :n] = sys.A
    aug[:n, n:] = sys.B
    growth = matrix_exponential(aug, t1 - t0)[:n, n:]
    if t1 == T:
        return growth
    return matrix_exponential(sys.A, T - t1) @ growth


def _as_control_callable(u, steps: int, T: float, m: int):
    """Accept a callable t -> (m,) or an array of nodal samples."""
    if callable(u):
        return u
    samples = np.atleast_2d(np.asarray(u, dtype=float))
    if samples.shape[0] == 1 and samples.shape[1] == steps + 1 and m == 1:
        samples = samples.T
    if samples.shape != (steps + 1, m):
        raise DimensionError(
            f"control samples must have shape ({steps + 1}, {m}), got {samples.shape}"
        )
    nodes = np.linspace(0.0, T, steps + 1)

    def interp(t):
        return np.array([np.interp(t, nodes, samples[:, j]) for j in range(m)])

    return interp


def simulate(sys: LtiSystem, u, T: float, steps: int) -> Trajectory:
    """Fixed-step RK4 integration of x' = A x + B u from x(0) = 0.

    u may be a callable t -> (m,) vector (scalar return accepted for m=1)
    or an array of samples on the uniform step grid. Controls exposing a
    switch_times attribute get those times inserted as integration nodes
    and are treated as constant within each step, which keeps the fourth
    order of the scheme across the discontinuities.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    control = _as_control_callable(u, steps, T, sys.m)
    grid = np.linspace(0.0, T, steps + 1)
    switch_times = getattr(control, "switch_times", None)
    piecewise = switch_times is not None
    if piecewise and len(switch_times) > 0:
        interior = np.asarray(switch_times, dtype=float)
        interior = interior[(interior > 0.0) & (interior < T)]
        grid = np.unique(np.concatenate([grid, interior]))

    A, B = sys.A, sys.B

    def eval_u(t):
        return np.atleast_1d(np.asarray(control(t), dtype=float))

    x = np.zeros(sys.n)
    states = np.empty((len(grid), sys.n))
    states[0] = x
    steps_total = len(grid) - 1
    if piecewise:
        # constant drive per interval (grid is switch-aligned), sampled at
        # the midpoints in one vectorized call
        mids = 0.5 * (grid[:-1] + grid[1:])
        useg = np.atleast_2d(np.asarray(control(mids), dtype=float))
        if useg.shape != (steps_total, sys.m):
            useg = useg.reshape(steps_total, sys.m)
        drives = useg @ B.T
        hs = np.diff(grid)
        for k in range(steps_total):
            h = hs[k]
            bu = drives[k]
            k1 = A @ x + bu
            k2 = A @ (x + 0.5 * h * k1) + bu
            k3 = A @ (x + 0.5 * h * k2) + bu
            k4 = A @ (x + h * k3) + bu
            x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            states[k + 1] = x
        controls = np.atleast_2d(np.asarray(control(grid), dtype=float))
        if controls.shape != (len(grid), sys.m):
            controls = controls.reshape(len(grid), sys.m)
    else:
        for k in range(steps_total):
            t = grid[k]
            h = grid[k + 1] - t
            u1 = eval_u(t)
            u2 = eval_u(t + 0.5 * h)
            u4 = eval_u(t + h)
            bu2 = B @ u2
            k1 = A @ x + B @ u1
            k2 = A @ (x + 0.5 * h * k1) + bu2
            k3 = A @ (x + 0.5 * h * k2) + bu2
            k4 = A @ (x + h * k3) + B @ u4
            x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            states[k + 1] = x
        controls = np.stack([eval_u(t) for t in grid])
    return Trajectory(times=grid, states=states, controls=controls)


def classify_spectrum(sys: LtiSystem, tol: float | None = None) -> SpectrumClass:
    """Eigenvalues of A and whether the planar-real-distinct case applies.

    The flag requires n = 2, a purely real spectrum, and an eigenvalue
    separation above tol (default 1e-8 * max(1, ||A||)). Eigen-solver
    failures propagate as numpy.linalg.LinAlgError.
    """
    if tol is None:
        tol = 1e-8 * max(1.0, np.linalg.norm(sys.A, 2))
    eigenvalues = np.linalg.eigvals(sys.A)
    flag = False
    if sys.n == 2 and np.all(np.isreal(eigenvalues)):
        real = np.sort(np.real(eigenvalues))
        flag = bool(real[1] - real[0] > tol)
    return SpectrumClass(eigenvalues=eigenvalues, is_planar_real_distinct=flag)
