"""Norms of P1 functions, error bundles and log-log slope fits."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .assembly import mass_matrix, stiffness_matrix
from .errors import ConfigurationError, DomainError
from .mesh import Mesh


@dataclass(frozen=True, eq=False)
class NormMatrices:
    mass: sp.csr_matrix
    stiffness: sp.csr_matrix

    @classmethod
    def for_mesh(cls, mesh: Mesh) -> "NormMatrices":
        return cls(mass_matrix(mesh), stiffness_matrix(mesh))

    @property
    def size(self) -> int:
        return self.mass.shape[0]


@dataclass(frozen=True)
class Norms:
    l2: float
    h1_semi: float
    h1: float
    combined: float


@dataclass(frozen=True)
class ErrorBundle:
    h1: float
    l2: float
    combined: float


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    max_residual: float
    n_points: int


def _quad(A, u):
    return max(float(u @ (A @ u)), 0.0)


def norms(mats: NormMatrices, u, U=None) -> Norms:
    """L2, H1-seminorm, H1 and combined ``sqrt(|u|_H1^2 + |U|^2)`` norms."""
    u = np.asarray(u, dtype=float)
    if u.shape != (mats.size,):
        raise ConfigurationError(f"nodal vector has shape {u.shape}, expected ({mats.size},)")
    l2sq = _quad(mats.mass, u)
    semisq = _quad(mats.stiffness, u)
    Usq = 0.0 if U is None else float(np.dot(U, U))
    return Norms(np.sqrt(l2sq), np.sqrt(semisq), np.sqrt(l2sq + semisq),
                 np.sqrt(l2sq + semisq + Usq))


def diff_same_mesh(sol_a, sol_b, mats: NormMatrices) -> ErrorBundle:
    n = norms(mats, sol_a.nodal - sol_b.nodal, sol_a.voltages - sol_b.voltages)
    return ErrorBundle(n.h1, n.l2, n.combined)


def diff_nested(coarse_sol, fine_ref_sol, P: sp.spmatrix, fine_mats: NormMatrices) -> ErrorBundle:
    """Errors of the prolongated coarse solution against a fine reference."""
    du = P @ coarse_sol.nodal - fine_ref_sol.nodal
    n = norms(fine_mats, du, coarse_sol.voltages - fine_ref_sol.voltages)
    return ErrorBundle(n.h1, n.l2, n.combined)


def spectral_norm(D) -> float:
    """Largest singular value."""
    D = np.asarray(D, dtype=float)
    if not np.all(np.isfinite(D)):
        raise DomainError("matrix has non-finite entries")
    if D.size == 0:
        return 0.0
    return float(np.linalg.svd(D, compute_uv=False)[0])


def fit_loglog(xs, ys) -> SlopeFit:
    """Least-squares line through ``(ln x, ln y)``.

    Raises
    ------
    ConfigurationError
        Fewer than three points.
    DomainError
        Non-positive data.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape:
        raise ConfigurationError("xs and ys differ in length")
    if len(xs) < 3:
        raise ConfigurationError(f"slope fit needs at least 3 points, got {len(xs)}")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise DomainError("log-log fit requires strictly positive data")
    lx, ly = np.log(xs), np.log(ys)
    A = np.column_stack([lx, np.ones_like(lx)])
    (slope, intercept), *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - A @ np.array([slope, intercept])
    return SlopeFit(float(slope), float(intercept), float(np.abs(resid).max()), len(xs))


def try_fit(xs, ys) -> Optional[SlopeFit]:
    """:func:`fit_loglog`, or ``None`` when there are too few points."""
    try:
        return fit_loglog(xs, ys)
    except ConfigurationError:
        return None
