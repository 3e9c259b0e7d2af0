"""Energy-bounded reachable sets: reachability Gramian, ellipsoid geometry,
and minimum-energy point-to-point control.
"""

from dataclasses import dataclass

import numpy as np

from .errors import UnreachableTargetError
from .lti import LtiSystem, expm_grid, matrix_exponential

__all__ = [
    "Gramian",
    "MinEnergyControl",
    "reachability_gramian",
    "ellipsoid_axes",
    "min_energy_control",
    "gramian_trace",
    "ellipsoid_to_json",
]

# relative eigenvalue ratio below which the Gramian is treated as singular
SINGULARITY_RATIO = 1e-10


@dataclass
class Gramian:
    """Reachability Gramian over [0, T] with its symmetric eigensystem.

    eigenvalues are sorted descending; eigenvectors[:, i] is the unit
    eigenvector paired with eigenvalues[i].
    """

    W: np.ndarray
    T: float
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def eigenpairs(self):
        return [
            (float(self.eigenvalues[i]), self.eigenvectors[:, i])
            for i in range(len(self.eigenvalues))
        ]


@dataclass
class MinEnergyControl:
    """Closed-form least-squared-energy control u(t) = B^T e^{A^T (T-t)} eta.

    eta solves W eta = xf; cost is the squared L2 norm xf^T eta. The
    used_pseudoinverse flag marks targets resolved through a rank-deficient
    Gramian.
    """

    A: np.ndarray
    B: np.ndarray
    T: float
    eta: np.ndarray
    target: np.ndarray
    cost: float
    used_pseudoinverse: bool = False

    def __call__(self, t):
        return self.B.T @ (matrix_exponential(self.A.T, self.T - t) @ self.eta)

    def on_grid(self, num: int):
        """Vectorized samples on a uniform grid: (times, values (num, m))."""
        times = np.linspace(0.0, self.T, num)
        mats = expm_grid(self.A.T, self.T, 0.0, num)
        values = np.einsum("knj,j->kn", mats, self.eta) @ self.B
        return times, values


def reachability_gramian(sys: LtiSystem, T: float) -> Gramian:
    """Gramian W = integral of e^{A(T-s)} B B^T e^{A^T(T-s)} over [0, T].

    Evaluated in closed form from the 2n-by-2n block exponential of
    [[-A, B B^T], [0, A^T]] and symmetrized before eigendecomposition.
    """
    if T <= 0:
        raise ValueError(f"horizon must be positive, got T={T}")
    n = sys.n
    block = np.zeros((2 * n, 2 * n))
    block[:n, :n] = -sys.A
    block[:n, n:] = sys.B @ sys.B.T
    block[n:, n:] = sys.A.T
    E = matrix_exponential(block, T)
    W = E[n:, n:].T @ E[:n, n:]
    W = 0.5 * (W + W.T)
    eigenvalues, eigenvectors = np.linalg.eigh(W)
    # zero out roundoff-scale negatives; anything larger stays visible
    floor = -1e-12 * max(1.0, float(np.max(np.abs(eigenvalues), initial=0.0)))
    eigenvalues = np.where((eigenvalues < 0.0) & (eigenvalues > floor), 0.0, eigenvalues)
    order = np.argsort(eigenvalues)[::-1]
    return Gramian(
        W=W,
        T=float(T),
        eigenvalues=eigenvalues[order],
        eigenvectors=eigenvectors[:, order],
    )


def ellipsoid_axes(g: Gramian, c: float):
    """Principal semi-axes of the energy-budget reachable ellipsoid.

    With budget c on the squared L2 norm of the input, axis i has length
    sqrt(c * lambda_i) along eigenvector v_i. Returned sorted by
    descending length.
    """
    if c <= 0:
        raise ValueError(f"budget must be positive, got c={c}")
    lengths = np.sqrt(c * np.clip(g.eigenvalues, 0.0, None))
    return [(float(lengths[i]), g.eigenvectors[:, i]) for i in range(len(lengths))]


def min_energy_control(sys: LtiSystem, T: float, xf) -> MinEnergyControl:
    """Least-energy control steering the origin to xf at time T.

    Solves W eta = xf directly when W is nonsingular. A rank-deficient W
    switches to the eigenvalue-truncated pseudo-inverse after checking xf
    lies in range(W); targets outside the range raise
    UnreachableTargetError.
    """
    xf = np.asarray(xf, dtype=float)
    if xf.shape != (sys.n,):
        raise ValueError(f"xf must have shape ({sys.n},), got {xf.shape}")
    if not np.all(np.isfinite(xf)):
        raise ValueError("xf must be finite")
    g = reachability_gramian(sys, T)
    lam_max = float(g.eigenvalues[0]) if len(g.eigenvalues) else 0.0
    singular = lam_max <= 0.0 or float(g.eigenvalues[-1]) <= SINGULARITY_RATIO * lam_max
    if not singular:
        eta = np.linalg.solve(g.W, xf)
        used_pinv = False
    else:
        cutoff = SINGULARITY_RATIO * max(lam_max, 1e-300)
        coeffs = g.eigenvectors.T @ xf
        inv = np.where(g.eigenvalues > cutoff, 1.0 / np.maximum(g.eigenvalues, cutoff), 0.0)
        eta = g.eigenvectors @ (inv * coeffs)
        residual = np.linalg.norm(g.W @ eta - xf)
        if residual > 1e-8 * max(np.linalg.norm(xf), 1e-300):
            raise UnreachableTargetError(
                f"target outside range of singular Gramian (residual {residual:.3e})"
            )
        used_pinv = True
    cost = float(xf @ eta)
    return MinEnergyControl(
        A=sys.A,
        B=sys.B,
        T=float(T),
        eta=eta,
        target=xf,
        cost=cost,
        used_pseudoinverse=used_pinv,
    )


def gramian_trace(g: Gramian) -> float:
    """Trace of W; equals the eigenvalue sum up to roundoff."""
    return float(np.trace(g.W))


def ellipsoid_to_json(g: Gramian, c: float) -> dict:
    axes = ellipsoid_axes(g, c)
    return {
        "T": g.T,
        "c": float(c),
        "axes": [
            {"length": length, "direction": direction.tolist()}
            for length, direction in axes
        ],
    }
