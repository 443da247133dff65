"""Contact-impedance and mesh-size sweeps on the regular polygon.

:func:`sweep_z` compares CEM solutions against the shunt model on one
graded mesh as the common contact impedance ``beta`` shrinks.
:func:`sweep_h` measures finite element convergence on a uniform
refinement hierarchy at fixed ``beta`` (or for the shunt model) against a
solution on a much finer reference mesh.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from . import __version__
from .analysis import (NormMatrices, SlopeFit, diff_nested, diff_same_mesh,
                       spectral_norm, try_fit)
from .assembly import (ConductivityField, ElectrodeLayout, assemble_cem,
                       assemble_shunt, trig_current)
from .errors import ConfigurationError, DomainError, NumericalError
from .mesh import (Mesh, build_regular_polygon_mesh, prolongation,
                   refine_boundary_layer, refine_uniform)
from .solver import RTOL, condition_estimate, measurement_matrix, solve

log = logging.getLogger(__name__)

ERROR_COLUMNS = ("h1", "combined", "l2", "rmap")


def default_betas() -> tuple:
    return tuple(float(b) for b in np.logspace(0, -5, 11))


@dataclass(frozen=True)
class SweepConfig:
    """Geometry, model and grid of a sweep.

    ``sigma`` is a 2x2 conductivity tensor applied on every triangle.
    ``current`` is either ``(kind, frequency)`` for a trigonometric pattern
    or an explicit list of ``M`` currents. ``fit_window`` is a Python slice
    ``(start, stop)`` over grid points; ``None`` fits all points.
    """

    n_sides: int = 16
    n_electrodes: int = 8
    base_level: int = 4
    boundary_rounds: int = 4
    sigma: tuple = ((1.0, 0.0), (0.0, 1.0))
    current: Union[tuple, list] = ("cos", 1)
    betas: tuple = field(default_factory=default_betas)
    h_levels: tuple = (1, 2, 3, 4, 5)
    reference_depth: int = 7
    fit_window: Optional[tuple] = None
    record_kappa: bool = False
    threads: int = 1

    def validate(self) -> None:
        if self.n_electrodes < 2:
            raise ConfigurationError(
                "at least 2 electrodes are needed: with one electrode current conservation "
                "forces I = 0")
        b = np.asarray(self.betas, dtype=float)
        if b.size == 0 or np.any(~np.isfinite(b)) or np.any(b <= 0):
            raise DomainError("beta grid must be non-empty and strictly positive")
        if np.any(np.diff(b) >= 0):
            raise ConfigurationError("beta grid must be strictly decreasing")
        lv = np.asarray(self.h_levels, dtype=int)
        if lv.size == 0 or np.any(lv < 0) or np.any(np.diff(lv) <= 0):
            raise ConfigurationError("h levels must be non-negative and strictly increasing")
        if self.reference_depth < lv.max() + 2:
            raise ConfigurationError("reference depth must exceed the finest level by at least 2")
        if self.base_level < 0 or self.boundary_rounds < 0:
            raise ConfigurationError("refinement counts must be non-negative")
        if self.threads < 1:
            raise ConfigurationError("threads must be positive")
        currents(self)

    def sigma_tensor(self) -> np.ndarray:
        return np.asarray(self.sigma, dtype=float).reshape(2, 2)

    def echo(self) -> dict:
        d = asdict(self)
        d["current"] = list(self.current)
        return d


def currents(config: SweepConfig) -> np.ndarray:
    cur = config.current
    if len(cur) == 2 and isinstance(cur[0], str):
        return trig_current(config.n_electrodes, int(cur[1]), cur[0])
    I = np.asarray(cur, dtype=float)
    if I.shape != (config.n_electrodes,):
        raise ConfigurationError(f"expected {config.n_electrodes} currents")
    if abs(I.sum()) > 1e-12 * np.linalg.norm(I):
        raise DomainError("current conservation violated: currents must sum to zero")
    return I


@dataclass
class SweepReport:
    """Error table of a sweep with fitted log-log slopes.

    ``rows`` holds ``(param, h1, combined, l2, rmap[, kappa])`` tuples in
    grid order. ``slopes`` maps column names to :class:`SlopeFit` or
    ``None`` when too few points were available.
    """

    kind: str
    param_name: str
    rows: list
    slopes: dict
    provenance: dict
    has_kappa: bool = False

    @property
    def columns(self) -> tuple:
        return ERROR_COLUMNS + (("kappa",) if self.has_kappa else ())

    def column(self, name: str) -> np.ndarray:
        idx = 1 + self.columns.index(name)
        return np.array([r[idx] for r in self.rows], dtype=float)

    @property
    def params(self) -> np.ndarray:
        return np.array([r[0] for r in self.rows], dtype=float)

    def slope(self, name: str) -> Optional[float]:
        fit = self.slopes.get(name)
        return None if fit is None else fit.slope


def _fit_columns(report: SweepReport, window: Optional[tuple]) -> dict:
    sl = slice(None) if window is None else slice(*window)
    x = report.params[sl]
    return {name: try_fit(x, report.column(name)[sl]) for name in report.columns}


def _map_ordered(fn, items, threads):
    if threads <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def graded_mesh(config: SweepConfig) -> Mesh:
    mesh = build_regular_polygon_mesh(config.n_sides, config.n_electrodes)
    for _ in range(config.base_level):
        mesh = refine_uniform(mesh)
    return refine_boundary_layer(mesh, config.boundary_rounds)


def _mesh_stats(mesh: Mesh) -> dict:
    stats = {"vertices": mesh.n_vertices, "triangles": mesh.n_triangles,
             "boundary_edges": len(mesh.boundary_edges), "h_max": mesh.mesh_size()}
    try:
        stats["h_interior"] = mesh.mesh_size("interior")
    except ValueError:
        pass
    stats["h_boundary"] = mesh.mesh_size("boundary")
    return stats


def _provenance(config: SweepConfig, kind: str, **extra) -> dict:
    return {"kind": kind, "version": __version__, "config": config.echo(),
            "solver_rtol": RTOL, "symmetry_tol": 1e-10, **extra}


def sweep_z(config: SweepConfig = SweepConfig()) -> SweepReport:
    """CEM versus shunt model discrepancy over the beta grid."""
    config.validate()
    mesh = graded_mesh(config)
    M = config.n_electrodes
    sigma = ConductivityField.uniform(mesh, config.sigma_tensor())
    I = currents(config)
    mats = NormMatrices.for_mesh(mesh)
    shunt = assemble_shunt(mesh, sigma, M)
    ref = solve(shunt, I)
    R0 = measurement_matrix(shunt)

    def point(beta):
        try:
            cem = assemble_cem(mesh, sigma, ElectrodeLayout.constant(M, beta))
            sol = solve(cem, I)
            err = diff_same_mesh(sol, ref, mats)
            row = [beta, err.h1, err.combined, err.l2,
                   spectral_norm(measurement_matrix(cem) - R0)]
            if config.record_kappa:
                row.append(condition_estimate(cem))
        except (NumericalError, ArithmeticError) as exc:
            raise NumericalError(f"z-sweep failed at beta={beta!r}: {exc}") from exc
        log.info("beta=%.3e h1=%.4e", beta, row[1])
        return tuple(float(v) for v in row)

    rows = _map_ordered(point, config.betas, config.threads)
    report = SweepReport("z", "beta", rows, {},
                         _provenance(config, "z", mesh=_mesh_stats(mesh)),
                         has_kappa=config.record_kappa)
    report.slopes = _fit_columns(report, config.fit_window)
    return report


def uniform_hierarchy(config: SweepConfig, depth: int) -> list:
    meshes = [build_regular_polygon_mesh(config.n_sides, config.n_electrodes)]
    for _ in range(depth):
        meshes.append(refine_uniform(meshes[-1]))
    return meshes


def _system(mesh, config, beta):
    sigma = ConductivityField.uniform(mesh, config.sigma_tensor())
    if beta == "shunt":
        return assemble_shunt(mesh, sigma, config.n_electrodes)
    return assemble_cem(mesh, sigma, ElectrodeLayout.constant(config.n_electrodes, beta))


def sweep_h(config: SweepConfig = SweepConfig(), beta: Union[float, str] = 1.0,
            meshes: Optional[Sequence[Mesh]] = None) -> SweepReport:
    """Finite element convergence in the mesh size at fixed ``beta``.

    ``beta="shunt"`` runs the shunt model. A precomputed uniform hierarchy
    (level ``k`` at index ``k``) may be passed to share meshes across sweeps.
    """
    config.validate()
    if beta != "shunt":
        beta = float(beta)
        if not beta > 0:
            raise DomainError("beta must be positive")
    depth = config.reference_depth
    if meshes is None:
        meshes = uniform_hierarchy(config, depth)
    fine = meshes[depth]
    I = currents(config)
    mats = NormMatrices.for_mesh(fine)
    ref_sys = _system(fine, config, beta)
    ref = solve(ref_sys, I)
    R_ref = measurement_matrix(ref_sys)
    del ref_sys

    def point(level):
        mesh = meshes[level]
        try:
            sys_ = _system(mesh, config, beta)
            sol = solve(sys_, I)
            err = diff_nested(sol, ref, prolongation(mesh, fine), mats)
            rmap = spectral_norm(measurement_matrix(sys_) - R_ref)
        except (NumericalError, ArithmeticError) as exc:
            raise NumericalError(f"h-sweep failed at level {level}: {exc}") from exc
        return (float(mesh.mesh_size()), float(err.h1), float(err.combined),
                float(err.l2), float(rmap))

    rows = _map_ordered(point, config.h_levels, config.threads)
    report = SweepReport("h", "h", rows, {},
                         _provenance(config, "h", beta=beta, reference=_mesh_stats(fine)))
    report.slopes = _fit_columns(report, config.fit_window)
    return report
