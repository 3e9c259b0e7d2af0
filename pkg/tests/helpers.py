"""Shared fixtures and independent numerical oracles for the test suite.

Oracles deliberately avoid the library's computational paths: matrix
exponentials come from eigendecomposition, integrals from (adaptive)
trapezoid rules, and memberships from facet arithmetic.
"""

import numpy as np

from reachkit import LtiSystem

# planar demo system used throughout: real distinct eigenvalues, one input
DEMO_A = np.array([[0.4, -0.3], [0.5, 1.7]])
DEMO_B = np.array([[1.0], [0.0]])

# eigenvalues of DEMO_A frozen from the characteristic polynomial:
# (2.1 +- sqrt(1.09)) / 2
DEMO_EIG_SLOW = 0.5279846652873577
DEMO_EIG_FAST = 1.5720153347126423


def demo_system() -> LtiSystem:
    return LtiSystem(DEMO_A, DEMO_B)


def eig_expm(A: np.ndarray, t: float) -> np.ndarray:
    """Matrix exponential through eigendecomposition (oracle path)."""
    lam, V = np.linalg.eig(A)
    return np.real(V @ np.diag(np.exp(lam * t)) @ np.linalg.inv(V))


def eig_expm_grid(A: np.ndarray, times: np.ndarray) -> np.ndarray:
    """e^{A t} for each t in times, vectorized over the spectrum."""
    lam, V = np.linalg.eig(A)
    Vinv = np.linalg.inv(V)
    phases = np.exp(np.multiply.outer(times, lam))  # (K, n)
    return np.real(np.einsum("ij,kj,jl->kil", V, phases, Vinv))


def adaptive_trapezoid(f, a: float, b: float, rel_tol: float = 1e-10, max_levels: int = 24):
    """Trapezoid rule with interval halving until the estimate settles."""
    n = 8
    xs = np.linspace(a, b, n + 1)
    vals = np.array([f(x) for x in xs])
    est = np.trapezoid(vals, xs, axis=0)
    for _ in range(max_levels):
        n *= 2
        xs = np.linspace(a, b, n + 1)
        vals = np.array([f(x) for x in xs])
        new = np.trapezoid(vals, xs, axis=0)
        scale = np.max(np.abs(new)) or 1.0
        if np.max(np.abs(new - est)) <= rel_tol * scale:
            return new
        est = new
    return est


def conv_integral_oracle(sys: LtiSystem, T: float, t0: float, t1: float, rel_tol=1e-10):
    """Quadrature oracle for the convolution integral of e^{A(T-s)} B."""
    return adaptive_trapezoid(lambda s: eig_expm(sys.A, T - s) @ sys.B, t0, t1, rel_tol)


def gramian_oracle(sys: LtiSystem, T: float, nodes: int = 100001) -> np.ndarray:
    """Trapezoid quadrature of the Gramian integrand on a dense grid."""
    times = np.linspace(0.0, T, nodes)
    EB = np.einsum("kij,jm->kim", eig_expm_grid(sys.A, T - times), sys.B)
    prods = np.einsum("kim,kjm->kij", EB, EB)
    return np.trapezoid(prods, times, axis=0)


def well_conditioned(A: np.ndarray, limit: float = 1e6) -> bool:
    _, V = np.linalg.eig(A)
    return np.linalg.cond(V) < limit


def random_stable_system(rng, n: int, m: int, norm_cap: float = 5.0) -> LtiSystem:
    """Random Hurwitz system with a well-conditioned eigenbasis."""
    while True:
        M = rng.standard_normal((n, n))
        shift = max(np.real(np.linalg.eigvals(M))) + rng.uniform(0.2, 1.0)
        A = M - shift * np.eye(n)
        scale = np.linalg.norm(A, 2)
        if scale > norm_cap:
            A = A * (norm_cap / scale)
        if well_conditioned(A):
            break
    B = rng.standard_normal((n, m))
    return LtiSystem(A, B)


def random_planar_real_distinct(rng, min_gap: float = 0.3) -> LtiSystem:
    """Planar single-input system built from a real distinct spectrum."""
    while True:
        lam = np.sort(rng.uniform(-2.0, 2.0, 2))
        if lam[1] - lam[0] >= min_gap:
            break
    while True:
        V = rng.standard_normal((2, 2))
        if abs(np.linalg.det(V)) > 0.3:
            break
    A = V @ np.diag(lam) @ np.linalg.inv(V)
    B = rng.standard_normal((2, 1))
    if np.linalg.norm(B) < 0.3:
        B = B + 0.5 * np.sign(B + 1e-12)
    return LtiSystem(A, B)


def random_bang_bang(rng, bounds_mag: float = 1.0, max_switches: int = 5, T: float = 1.0):
    """Random saturated control with up to max_switches alternations."""
    from reachkit import PiecewiseConstantControl

    k = int(rng.integers(0, max_switches + 1))
    switches = np.sort(rng.uniform(0.0, T, k))
    start = rng.choice([-1.0, 1.0])
    values = bounds_mag * start * (-1.0) ** np.arange(k + 1)
    return PiecewiseConstantControl(
        switch_times=switches, values=values.reshape(-1, 1), horizon=T
    )


def frontier_adapted_grid(sys, spec, n_dirs: int = 720, extra_shells=(5.0, 10.0, 20.0, 50.0, 100.0),
                          extra_dirs: int = 302):
    """Deterministic costate grid combining large-magnitude shells with
    costates rescaled onto the unit-cost frontier.

    Stage one sweeps unit directions to estimate each direction's optimal
    cost; stage two scales every direction so its cost lands just inside
    the budget. The union resolves the reachable set's boundary while
    keeping the large-radius shells of the reference sweep.
    """
    from reachkit import costate_grid, sample_reach

    angles = 2.0 * np.pi * np.arange(n_dirs) / n_dirs
    dirs = np.column_stack([np.cos(angles), np.sin(angles)])
    probe = sample_reach(sys, spec, dirs)
    costs = np.array([s.cost_p for s in probe.samples])
    budget_p = spec.budget**spec.p
    radii = (0.999999999 * budget_p / costs) ** (1.0 / spec.q)
    adapted = dirs * radii[:, None]
    shells = costate_grid(2, extra_shells, extra_dirs)
    return np.vstack([shells, adapted])
