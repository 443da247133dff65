"""Galerkin systems for the complete electrode model and the shunt model.

Unknowns are ordered as ``[u_1 .. u_N, c_1 .. c_{M-1}]`` where the electrode
voltages are ``U = basis @ c`` for a zero-sum voltage basis (by default
``e_k - e_M``). All integrals are closed form for P1 elements with
piecewise constant conductivity.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, DomainError, GeometryError, StructuralError
from .mesh import AREA_EPS, Mesh


# ---------------------------------------------------------------- domain types

@dataclass(frozen=True)
class ElectrodeLayout:
    """Contact impedances ``z`` of ``M`` electrodes."""

    z: np.ndarray

    def __post_init__(self):
        z = np.atleast_1d(np.asarray(self.z, dtype=float))
        if z.ndim != 1 or len(z) < 2:
            raise ConfigurationError("an electrode layout needs at least 2 electrodes")
        if not np.all(np.isfinite(z)) or np.any(z <= 0):
            raise DomainError("contact impedances must be positive and finite")
        z.setflags(write=False)
        object.__setattr__(self, "z", z)

    @classmethod
    def constant(cls, M: int, beta: float) -> "ElectrodeLayout":
        return cls(np.full(M, float(beta)))

    @property
    def M(self) -> int:
        return len(self.z)

    @property
    def z_min(self) -> float:
        return float(self.z.min())

    @property
    def z_max(self) -> float:
        return float(self.z.max())


class ConductivityField:
    """Piecewise constant symmetric conductivity, one 2x2 tensor per triangle."""

    def __init__(self, tensors: np.ndarray, label: str = "custom"):
        tensors = np.asarray(tensors, dtype=float)
        if tensors.ndim != 3 or tensors.shape[1:] != (2, 2):
            raise ConfigurationError("conductivity must have shape (T, 2, 2)")
        if not np.allclose(tensors, tensors.transpose(0, 2, 1), rtol=0, atol=1e-14):
            raise DomainError("conductivity tensors must be symmetric")
        eig = np.linalg.eigvalsh(tensors)
        if np.any(eig <= 0):
            raise DomainError("conductivity tensors must be positive definite")
        self.tensors = tensors
        self.sigma_min = float(eig.min())
        self.sigma_max = float(eig.max())
        self.label = label

    @classmethod
    def isotropic(cls, mesh: Mesh, value: float = 1.0) -> "ConductivityField":
        return cls.uniform(mesh, value * np.eye(2), label=f"isotropic({value!r})")

    @classmethod
    def uniform(cls, mesh: Mesh, tensor, label: Optional[str] = None) -> "ConductivityField":
        tensor = np.asarray(tensor, dtype=float)
        if label is None:
            label = "uniform(" + ",".join(repr(float(x)) for x in tensor.ravel()) + ")"
        return cls(np.broadcast_to(tensor, (mesh.n_triangles, 2, 2)).copy(), label)

    def __len__(self):
        return len(self.tensors)


def default_voltage_basis(M: int) -> np.ndarray:
    """Columns ``e_k - e_M`` for ``k = 1 .. M-1``."""
    basis = np.zeros((M, M - 1))
    basis[: M - 1] = np.eye(M - 1)
    basis[M - 1] = -1.0
    return basis


@dataclass(frozen=True)
class DofMap:
    N: int
    M: int
    voltage_basis: np.ndarray

    def __post_init__(self):
        B = np.asarray(self.voltage_basis, dtype=float)
        if B.shape != (self.M, self.M - 1):
            raise ConfigurationError(f"voltage basis must be {self.M}x{self.M - 1}")
        if np.abs(B.sum(axis=0)).max(initial=0) > 1e-12 * max(1.0, np.abs(B).max()):
            raise ConfigurationError("voltage basis columns must sum to zero")
        if np.linalg.matrix_rank(B) != self.M - 1:
            raise ConfigurationError("voltage basis must have full column rank")
        object.__setattr__(self, "voltage_basis", B)

    @classmethod
    def default(cls, N: int, M: int) -> "DofMap":
        return cls(N, M, default_voltage_basis(M))

    @property
    def n_dofs(self) -> int:
        return self.N + self.M - 1


@dataclass(frozen=True, eq=False)
class CemSystem:
    A: sp.csr_matrix
    dofmap: DofMap
    mesh: Mesh
    sigma: ConductivityField
    layout: ElectrodeLayout
    provenance: dict = field(default_factory=dict)

    @cached_property
    def factor(self):
        from .solver import factorize
        return factorize(self.A)


@dataclass(frozen=True, eq=False)
class ShuntSystem:
    """Shunt model on the constrained space: ``A0 = C^T K C``.

    ``C`` maps reduced unknowns ``[u_free, c]`` to full unknowns ``[u, c]``.
    """

    A0: sp.csr_matrix
    C: sp.csr_matrix
    dofmap: DofMap
    mesh: Mesh
    sigma: ConductivityField
    free_nodes: np.ndarray
    provenance: dict = field(default_factory=dict)

    @property
    def n_reduced(self) -> int:
        return self.A0.shape[0]

    @cached_property
    def factor(self):
        from .solver import factorize
        return factorize(self.A0)


# ---------------------------------------------------------------- element level

def element_stiffness(points, sigma_T=None) -> np.ndarray:
    """Local stiffness ``area * grad(l_i)^T sigma grad(l_j)`` of a P1 triangle."""
    p = np.asarray(points, dtype=float)
    sigma_T = np.eye(2) if sigma_T is None else np.asarray(sigma_T, dtype=float)
    area, grads = _gradients(p[None])
    if area[0] <= AREA_EPS:
        raise GeometryError(f"degenerate triangle (area {area[0]:.3e})")
    g = grads[0]
    K = area[0] * g @ sigma_T @ g.T
    return 0.5 * (K + K.T)


def _gradients(p: np.ndarray):
    """Areas and barycentric gradients for a stack of triangles ``p`` (T, 3, 2)."""
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    # grad l_i = rot90(opposite edge) / det
    e0 = p[:, 2] - p[:, 1]
    e1 = p[:, 0] - p[:, 2]
    e2 = p[:, 1] - p[:, 0]
    E = np.stack([e0, e1, e2], axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        grads = np.stack([-E[..., 1], E[..., 0]], axis=-1) / det[:, None, None]
    return 0.5 * det, grads


def electrode_edge_blocks(a, b):
    """Boundary integrals of P1 traces on the edge ``[a, b]``.

    Returns
    -------
    mass : (2, 2) array, ``int phi_i phi_j``
    load : (2,) array, ``int phi_i``
    length : float
    """
    length = float(np.linalg.norm(np.asarray(b, float) - np.asarray(a, float)))
    if length <= 0.0:
        raise GeometryError("zero-length boundary edge")
    mass = length / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])
    return mass, np.full(2, length / 2.0), length


# ---------------------------------------------------------------- global level

def stiffness_matrix(mesh: Mesh, sigma: Optional[ConductivityField] = None) -> sp.csr_matrix:
    """Global P1 stiffness ``int sigma grad phi_i . grad phi_j`` (N x N)."""
    t = mesh.triangles
    area, grads = _gradients(mesh.vertices[t])
    if np.any(area <= AREA_EPS):
        raise GeometryError("mesh contains degenerate triangles")
    if sigma is None:
        local = np.einsum("tik,tjk->tij", grads, grads)
    else:
        if len(sigma) != mesh.n_triangles:
            raise ConfigurationError("conductivity size does not match the mesh")
        local = np.einsum("tik,tkl,tjl->tij", grads, sigma.tensors, grads)
        local = 0.5 * (local + local.transpose(0, 2, 1))  # exact symmetry
    local *= area[:, None, None]
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    N = mesh.n_vertices
    return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(N, N))


def mass_matrix(mesh: Mesh) -> sp.csr_matrix:
    """Global P1 mass ``int phi_i phi_j`` (N x N)."""
    t = mesh.triangles
    area = mesh.signed_areas()
    ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
    local = area[:, None, None] * ref
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    N = mesh.n_vertices
    return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(N, N))


def electrode_blocks(mesh: Mesh, M: int):
    """Geometric electrode blocks shared by all impedance vectors.

    Returns ``(G, S, lengths)`` where ``G[m]`` is the N x N edge mass matrix of
    electrode ``m + 1``, ``S`` is the N x M matrix of ``int_{E_m} phi_i`` and
    ``lengths[m] = |E_m|``.
    """
    N = mesh.n_vertices
    tags = mesh.boundary_tags
    if tags.max(initial=0) > M:
        raise ConfigurationError(
            f"mesh has electrode tag {int(tags.max())} but only {M} impedances were given"
        )
    G = []
    s_rows, s_cols, s_vals = [], [], []
    lengths = np.zeros(M)
    for m in range(1, M + 1):
        edges = mesh.electrode_edges(m)
        if len(edges) == 0:
            raise ConfigurationError(f"electrode {m} is missing from the mesh")
        ell = np.linalg.norm(mesh.vertices[edges[:, 1]] - mesh.vertices[edges[:, 0]], axis=1)
        if np.any(ell <= 0):
            raise GeometryError("zero-length electrode edge")
        local = ell[:, None, None] / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])
        rows = np.repeat(edges, 2, axis=1).ravel()
        cols = np.tile(edges, (1, 2)).ravel()
        G.append(sp.csr_matrix((local.ravel(), (rows, cols)), shape=(N, N)))
        s_rows.append(edges.ravel())
        s_cols.append(np.full(edges.size, m - 1))
        s_vals.append(np.repeat(ell / 2.0, 2))
        lengths[m - 1] = ell.sum()
    S = sp.csr_matrix(
        (np.concatenate(s_vals), (np.concatenate(s_rows), np.concatenate(s_cols))),
        shape=(N, M),
    )
    return G, S, lengths


def assemble_cem(mesh: Mesh, sigma: ConductivityField, layout: ElectrodeLayout,
                 voltage_basis: Optional[np.ndarray] = None) -> CemSystem:
    """Assemble the CEM matrix on ``P1 + zero-sum voltages``.

    The electrode term ``(1/z_m) int_{E_m} (v - V_m)(w - W_m)`` contributes
    ``G_m / z_m`` to the nodal block, ``-S_m e_m^T B / z_m`` to the coupling
    block and ``B^T diag(|E_m| / z_m) B`` to the voltage block, with ``B``
    the voltage basis.
    """
    M = layout.M
    if mesh.n_electrodes != M:
        raise ConfigurationError(
            f"mesh has {mesh.n_electrodes} electrodes but the layout has {M}"
        )
    dofmap = DofMap(mesh.n_vertices, M,
                    default_voltage_basis(M) if voltage_basis is None else voltage_basis)
    K = stiffness_matrix(mesh, sigma)
    G, S, lengths = electrode_blocks(mesh, M)
    inv_z = 1.0 / layout.z
    Auu = K + sum(g * w for g, w in zip(G, inv_z))
    Auc = -(S @ sp.diags(inv_z)) @ dofmap.voltage_basis
    Acc = dofmap.voltage_basis.T @ ((lengths * inv_z)[:, None] * dofmap.voltage_basis)
    A = sp.bmat([[Auu, sp.csr_matrix(Auc)], [sp.csr_matrix(Auc.T), sp.csr_matrix(Acc)]],
                format="csr")
    A.sum_duplicates()
    prov = {"model": "cem", "n_vertices": mesh.n_vertices, "n_triangles": mesh.n_triangles,
            "sigma": sigma.label, "z": [float(x) for x in layout.z]}
    return CemSystem(A, dofmap, mesh, sigma, layout, prov)


def electrode_node_map(mesh: Mesh, M: int) -> np.ndarray:
    """Electrode index (1..M) of every vertex, 0 for vertices on no electrode."""
    owner = np.zeros(mesh.n_vertices, dtype=int)
    for m in range(1, M + 1):
        verts = mesh.electrode_vertices(m)
        if np.any(owner[verts] != 0):
            raise StructuralError(f"electrode {m} touches another electrode")
        owner[verts] = m
    return owner


def assemble_shunt(mesh: Mesh, sigma: ConductivityField, M: int,
                   voltage_basis: Optional[np.ndarray] = None) -> ShuntSystem:
    """Assemble the shunt model by eliminating electrode-node unknowns.

    Every vertex on the closure of electrode ``m`` takes the value ``U_m``,
    so the electrode term vanishes and ``A0 = C^T K C``.
    """
    if mesh.n_electrodes != M:
        raise ConfigurationError(f"mesh has {mesh.n_electrodes} electrodes, expected {M}")
    dofmap = DofMap(mesh.n_vertices, M,
                    default_voltage_basis(M) if voltage_basis is None else voltage_basis)
    N = mesh.n_vertices
    owner = electrode_node_map(mesh, M)
    free = np.flatnonzero(owner == 0)
    n_free = len(free)
    basis = dofmap.voltage_basis

    rows = [free, N + np.arange(M - 1)]
    cols = [np.arange(n_free), n_free + np.arange(M - 1)]
    vals = [np.ones(n_free), np.ones(M - 1)]
    bound = np.flatnonzero(owner)
    coeff = basis[owner[bound] - 1]  # (n_bound, M-1)
    rows.append(np.repeat(bound, M - 1))
    cols.append(np.tile(n_free + np.arange(M - 1), len(bound)))
    vals.append(coeff.ravel())
    C = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(dofmap.n_dofs, n_free + M - 1))
    C.eliminate_zeros()

    K = stiffness_matrix(mesh, sigma)
    Kfull = sp.block_diag([K, sp.csr_matrix((M - 1, M - 1))], format="csr")
    A0 = (C.T @ Kfull @ C).tocsr()
    A0.sum_duplicates()
    prov = {"model": "shunt", "n_vertices": N, "n_triangles": mesh.n_triangles,
            "sigma": sigma.label}
    return ShuntSystem(A0, C, dofmap, mesh, sigma, free, prov)


def assemble_load(I, dofmap: DofMap) -> np.ndarray:
    """Load vector of ``phi_I(W) = I . W`` in full CEM unknowns.

    Raises
    ------
    DomainError
        If the currents violate current conservation (do not sum to zero).
    """
    I = np.asarray(I, dtype=float)
    if I.shape != (dofmap.M,):
        raise ConfigurationError(f"expected {dofmap.M} electrode currents, got shape {I.shape}")
    if abs(I.sum()) > 1e-12 * np.linalg.norm(I):
        raise DomainError(
            f"current conservation violated: electrode currents sum to {I.sum():.3e}, not 0"
        )
    b = np.zeros(dofmap.n_dofs)
    b[dofmap.N:] = dofmap.voltage_basis.T @ I
    return b


def trig_current(M: int, frequency: int = 1, kind: str = "cos") -> np.ndarray:
    """Current pattern ``cos(2 pi f m / M)`` (or ``sin``) for ``m = 1 .. M``.

    ``frequency=1, kind="cos"`` is the default experiment input.
    """
    if not 1 <= frequency < M:
        raise ConfigurationError("frequency must lie in 1 .. M-1")
    m = np.arange(1, M + 1)
    arg = 2 * np.pi * frequency * m / M
    if kind == "cos":
        return np.cos(arg)
    if kind == "sin":
        return np.sin(arg)
    raise ConfigurationError(f"unknown current pattern kind {kind!r}")
