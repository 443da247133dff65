"""Linear solves, measurement matrices, current recovery and conditioning."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import CemSystem, ShuntSystem, assemble_load, electrode_blocks
from .errors import ConfigurationError, NumericalError, UnsupportedModelError
from .mesh import Mesh

log = logging.getLogger(__name__)

RTOL = 1e-12
DIRECT_LIMIT = 200_000
MAX_REFINEMENT_STEPS = 4
ROUNDOFF_FACTOR = 16


@dataclass(frozen=True)
class FESolution:
    """Nodal potentials and electrode voltages of one solve."""

    nodal: np.ndarray
    voltages: np.ndarray
    model: str = "cem"
    residual: float = 0.0


class _DirectFactor:
    """SuperLU with symmetric pivoting; the U diagonal holds the LDL^T pivots."""

    def __init__(self, A: sp.csr_matrix):
        self.A = A.tocsc()
        self.lu = spla.splu(
            self.A, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
            options={"SymmetricMode": True},
        )
        pivots = self.lu.U.diagonal()
        if not np.array_equal(self.lu.perm_r, self.lu.perm_c) or np.any(pivots <= 0):
            raise NumericalError("system matrix is not symmetric positive definite")

    def solve(self, b: np.ndarray) -> tuple[np.ndarray, float]:
        b = np.asarray(b, dtype=float)
        bnorm = np.linalg.norm(b, axis=0)
        if np.all(bnorm == 0):
            return np.zeros_like(b), 0.0
        safe = np.where(bnorm > 0, bnorm, 1.0)
        x = self.lu.solve(b)
        for _ in range(MAX_REFINEMENT_STEPS):
            r = b - self.A @ x
            rel = float(np.max(np.linalg.norm(r, axis=0) / safe))
            if rel <= RTOL:
                return x, rel
            x = x + self.lu.solve(r)
        r = b - self.A @ x
        rel = np.linalg.norm(r, axis=0) / safe
        if np.all(rel <= np.maximum(RTOL, self._roundoff_floor(x, safe))):
            return x, float(rel.max())
        raise NumericalError(f"direct solve residual {rel.max():.3e} exceeds {RTOL:g}",
                             float(rel.max()))

    def _roundoff_floor(self, x, bnorm):
        # residual of any double-precision x is at least ~eps |A| |x|
        absA = abs(self.A)
        return ROUNDOFF_FACTOR * np.finfo(float).eps * np.linalg.norm(absA @ abs(x), axis=0) / bnorm


class _CGFactor:
    """Jacobi-preconditioned conjugate gradients."""

    def __init__(self, A: sp.csr_matrix):
        self.A = A.tocsr()
        d = self.A.diagonal()
        if np.any(d <= 0):
            raise NumericalError("system matrix has a non-positive diagonal entry")
        self.Minv = sp.diags(1.0 / d)

    def _solve1(self, b):
        bnorm = np.linalg.norm(b)
        if bnorm == 0:
            return np.zeros_like(b), 0.0
        x, info = spla.cg(self.A, b, rtol=RTOL, atol=0.0, M=self.Minv, maxiter=20 * len(b))
        rel = float(np.linalg.norm(b - self.A @ x) / bnorm)
        if info != 0 or rel > RTOL * 10:
            raise NumericalError(f"CG did not converge (info={info}, residual {rel:.3e})", rel)
        return x, rel

    def solve(self, b):
        b = np.asarray(b, dtype=float)
        if b.ndim == 1:
            return self._solve1(b)
        cols = [self._solve1(b[:, j]) for j in range(b.shape[1])]
        return np.column_stack([c[0] for c in cols]), max(c[1] for c in cols)


def factorize(A: sp.spmatrix):
    """Factor an SPD matrix: sparse direct up to ``DIRECT_LIMIT`` unknowns, else CG."""
    if A.shape[0] <= DIRECT_LIMIT:
        return _DirectFactor(A)
    return _CGFactor(A)


def _split(system, x):
    dm = system.dofmap
    nodal = x[: dm.N]
    voltages = dm.voltage_basis @ x[dm.N:]
    return nodal, voltages


def solve_cem(system: CemSystem, load: np.ndarray) -> FESolution:
    """Solve ``A x = b`` and split into nodal potentials and voltages."""
    load = np.asarray(load, dtype=float)
    if load.shape != (system.dofmap.n_dofs,):
        raise ConfigurationError("load vector size does not match the system")
    x, res = system.factor.solve(load)
    nodal, U = _split(system, x)
    return FESolution(nodal, U, "cem", res)


def solve_shunt(system: ShuntSystem, load: np.ndarray) -> FESolution:
    """Solve the reduced shunt system; ``load`` is given in full CEM unknowns."""
    load = np.asarray(load, dtype=float)
    if load.shape != (system.dofmap.n_dofs,):
        raise ConfigurationError("load vector size does not match the system")
    x0, res = system.factor.solve(system.C.T @ load)
    nodal, U = _split(system, system.C @ x0)
    return FESolution(nodal, U, "shunt", res)


def solve(system: Union[CemSystem, ShuntSystem], I) -> FESolution:
    """Convenience wrapper: build the load for currents ``I`` and solve."""
    load = assemble_load(I, system.dofmap)
    if isinstance(system, ShuntSystem):
        return solve_shunt(system, load)
    return solve_cem(system, load)


def measurement_matrix(system: Union[CemSystem, ShuntSystem],
                       symmetry_tol: float = 1e-10) -> np.ndarray:
    """Current-to-voltage map ``R`` with ``R @ ones = 0``.

    Solves for the currents ``e_k - e_M`` and completes ``R`` by the
    null-space condition. The asymmetry is checked against ``symmetry_tol``
    before ``R`` is symmetrized.
    """
    dm = system.dofmap
    M = dm.M
    currents = np.zeros((M, M - 1))
    currents[: M - 1] = np.eye(M - 1)
    currents[M - 1] = -1.0
    loads = np.zeros((dm.n_dofs, M - 1))
    loads[dm.N:] = dm.voltage_basis.T @ currents
    if isinstance(system, ShuntSystem):
        x0, _ = system.factor.solve(system.C.T @ loads)
        x = system.C @ x0
    else:
        x, _ = system.factor.solve(loads)
    U = dm.voltage_basis @ x[dm.N:]
    lhs = np.column_stack([currents, np.ones(M)])
    rhs = np.column_stack([U, np.zeros(M)])
    R = np.linalg.solve(lhs.T, rhs.T).T
    defect = np.abs(R - R.T).max()
    scale = np.linalg.norm(R, 2)
    if defect > symmetry_tol * scale:
        raise NumericalError(
            f"measurement matrix asymmetry {defect:.3e} exceeds {symmetry_tol:g} * |R|"
        )
    return 0.5 * (R + R.T)


def electrode_currents(solution: FESolution, mesh: Mesh, layout) -> np.ndarray:
    """Electrode currents ``(1/z_m) int_{E_m} (U_m - u) dS`` of a CEM solution."""
    if solution.model != "cem":
        raise UnsupportedModelError(
            "electrode currents are only defined through the Robin condition of the CEM"
        )
    _, S, lengths = electrode_blocks(mesh, layout.M)
    return (lengths * solution.voltages - S.T @ solution.nodal) / layout.z


# ---------------------------------------------------------------- conditioning

def _power_iteration(apply, n, rng, rtol, maxiter, block=10):
    """Largest eigenvalue of an SPD operator by block power iteration.

    Rayleigh-Ritz on the block handles clustered top eigenvalues; iteration
    stops once the top Ritz pair has ``|A x - theta x| <= rtol * theta``.
    """
    block = min(block, n)
    X, _ = np.linalg.qr(rng.standard_normal((n, block)))
    for _ in range(maxiter):
        Y = apply(X)
        H = X.T @ Y
        theta, W = np.linalg.eigh(0.5 * (H + H.T))
        top = theta[-1]
        if not top > 0:
            raise NumericalError("power iteration produced a non-positive Rayleigh quotient")
        r = Y @ W[:, -1] - top * (X @ W[:, -1])
        if np.linalg.norm(r) <= rtol * top:
            return float(top)
        X, _ = np.linalg.qr(Y @ W[:, ::-1])
    raise NumericalError(f"power iteration stagnated after {maxiter} steps")


def condition_estimate(system, rtol: float = 1e-2, seed: int = 0,
                       maxiter: int = 20000) -> float:
    """Estimate ``lambda_max / lambda_min`` of an SPD system matrix.

    Block power iteration on ``A`` and on ``A^{-1}`` (through the
    factorization), each converged to a residual of ``rtol / 10`` relative
    to the eigenvalue.
    """
    if isinstance(system, CemSystem):
        A, factor = system.A, system.factor
    elif isinstance(system, ShuntSystem):
        A, factor = system.A0, system.factor
    else:
        A = sp.csr_matrix(system)
        factor = factorize(A)
    n = A.shape[0]
    rng = np.random.default_rng(seed)
    lam_max = _power_iteration(lambda v: A @ v, n, rng, rtol / 10, maxiter)
    inv_min = _power_iteration(lambda v: factor.solve(v)[0], n, rng, rtol / 10, maxiter)
    return lam_max * inv_min
