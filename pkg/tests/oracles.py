"""Dense brute-force oracles, independent of the closed-form assembly."""
import numpy as np

# 7-point degree-5 rule on the reference triangle (barycentric, weights sum to 1)
_A1, _B1, _W1 = 0.059715871789770, 0.470142064105115, 0.132394152788506
_A2, _B2, _W2 = 0.797426985353087, 0.101286507323456, 0.125939180544827
TRI_POINTS = np.array([
    [1 / 3, 1 / 3, 1 / 3],
    [_A1, _B1, _B1], [_B1, _A1, _B1], [_B1, _B1, _A1],
    [_A2, _B2, _B2], [_B2, _A2, _B2], [_B2, _B2, _A2],
])
TRI_WEIGHTS = np.array([0.225, _W1, _W1, _W1, _W2, _W2, _W2])

_g = np.sqrt(3 / 5) / 2
EDGE_POINTS = np.array([0.5 - _g, 0.5, 0.5 + _g])
EDGE_WEIGHTS = np.array([5, 8, 5]) / 18


def _hat_coefficients(p):
    """Rows (c0, cx, cy) with lambda_i(x, y) = c0 + cx x + cy y."""
    T = np.array([[1.0, 1.0, 1.0], p[:, 0], p[:, 1]])
    return np.linalg.inv(T)  # row i -> lambda_i


def quadrature_form(mesh, sigma_tensors, z, basis_nodal, basis_volt):
    """Gram matrix of the electrode bilinear form by numerical quadrature.

    ``basis_nodal`` is (N, n) nodal coefficients of each basis function and
    ``basis_volt`` is (M, n) voltage coefficients. ``z=None`` drops the
    electrode term.
    """
    n = basis_nodal.shape[1]
    A = np.zeros((n, n))
    for t, tri in enumerate(mesh.triangles):
        p = mesh.vertices[tri]
        C = _hat_coefficients(p)
        area = 0.5 * abs(np.linalg.det(np.array([p[1] - p[0], p[2] - p[0]])))
        coef = basis_nodal[tri]                       # (3, n)
        for bary, w in zip(TRI_POINTS, TRI_WEIGHTS):
            x = bary @ p
            lam_grad = C[:, 1:]                       # (3, 2)
            grad = lam_grad.T @ coef                  # (2, n)
            # evaluating lambda at x doubles as a consistency check
            lam = C[:, 0] + C[:, 1:] @ x
            assert np.allclose(lam, bary, atol=1e-12)
            A += w * area * grad.T @ sigma_tensors[t] @ grad
    if z is None:
        return A
    for (a, b), tag in zip(mesh.boundary_edges, mesh.boundary_tags):
        if tag == 0:
            continue
        pa, pb = mesh.vertices[a], mesh.vertices[b]
        ell = np.linalg.norm(pb - pa)
        for s, w in zip(EDGE_POINTS, EDGE_WEIGHTS):
            trace = (1 - s) * basis_nodal[a] + s * basis_nodal[b] - basis_volt[tag - 1]
            A += w * ell / z[tag - 1] * np.outer(trace, trace)
    return A


def cem_basis(mesh, voltage_basis):
    N, M = mesh.n_vertices, voltage_basis.shape[0]
    nodal = np.hstack([np.eye(N), np.zeros((N, M - 1))])
    volt = np.hstack([np.zeros((M, N)), voltage_basis])
    return nodal, volt


def shunt_basis(mesh, voltage_basis):
    """Basis of the constrained space built directly from the electrode tags."""
    N, M = mesh.n_vertices, voltage_basis.shape[0]
    owner = {}
    for (a, b), tag in zip(mesh.boundary_edges, mesh.boundary_tags):
        if tag:
            owner[int(a)] = tag
            owner[int(b)] = tag
    free = [i for i in range(N) if i not in owner]
    nodal = np.zeros((N, len(free) + M - 1))
    volt = np.zeros((M, len(free) + M - 1))
    for j, i in enumerate(free):
        nodal[i, j] = 1.0
    for k in range(M - 1):
        col = len(free) + k
        volt[:, col] = voltage_basis[:, k]
        for v, m in owner.items():
            nodal[v, col] = voltage_basis[m - 1, k]
    return nodal, volt



def small_corpus():
    """Meshes with at most 50 CEM unknowns, paired with a label."""
    from eitcem.mesh import (Mesh, build_regular_polygon_mesh, refine_boundary_layer,
                             refine_uniform)

    square = Mesh(np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]),
                  np.array([[0, 1, 2], [0, 2, 3]]),
                  np.array([[0, 1], [1, 2], [2, 3], [3, 0]]), np.array([1, 0, 2, 0]))
    out = [("square", square)]
    for n, M in [(4, 2), (8, 2), (8, 4), (12, 3), (16, 8)]:
        out.append((f"{n}-gon M={M}", build_regular_polygon_mesh(n, M)))
    out.append(("4-gon M=2 level 1", refine_uniform(build_regular_polygon_mesh(4, 2))))
    out.append(("8-gon M=4 level 1", refine_uniform(build_regular_polygon_mesh(8, 4))))
    out.append(("4-gon M=2 level 1 + layer",
                refine_boundary_layer(refine_uniform(build_regular_polygon_mesh(4, 2)), 1)))
    return [(name, m) for name, m in out if m.n_vertices + m.n_electrodes - 1 <= 50]
