"""
Forward solve on the hexadecagon
================================

Build the 16-gon with eight electrodes, solve the electrode model for a
cosine current pattern and check what comes back out of the electrodes.
"""
import numpy as np

from eitcem import (ConductivityField, ElectrodeLayout, assemble_cem, assemble_shunt,
                    build_regular_polygon_mesh, electrode_currents, measurement_matrix,
                    refine_uniform, solve, trig_current)

# Level 0 is a fan of 16 triangles around the centre; electrodes sit on
# every other polygon edge.
mesh = build_regular_polygon_mesh(16, 8)
for _ in range(4):
    mesh = refine_uniform(mesh)
print(f"{mesh.n_vertices} vertices, {mesh.n_triangles} triangles, h = {mesh.mesh_size():.4f}")

sigma = ConductivityField.isotropic(mesh)
I = trig_current(8)                      # cos(2 pi m / 8)
print("applied currents:  ", np.round(I, 6))

for beta in (1.0, 1e-2, 1e-4):
    layout = ElectrodeLayout.constant(8, beta)
    system = assemble_cem(mesh, sigma, layout)
    sol = solve(system, I)
    # the Robin condition gives the currents back from (u, U)
    rec = electrode_currents(sol, mesh, layout)
    print(f"beta={beta:g}: U = {np.round(sol.voltages, 4)}, "
          f"recovery error {np.abs(rec - I).max():.1e}")

# Perfect contacts: the potential equals U on each electrode.
shunt = assemble_shunt(mesh, sigma, 8)
U0 = solve(shunt, I).voltages
print("shunt model:       ", np.round(U0, 4))

# The measurement matrix is symmetric with the constants in its kernel,
# and the cosine pattern is one of its eigenvectors.
R = measurement_matrix(shunt)
lam = I @ R @ I / (I @ I)
print(f"|R - R^T| = {np.abs(R - R.T).max():.1e}, |R 1| = {np.abs(R.sum(1)).max():.1e}")
print(f"R I = {lam:.5f} I up to {np.abs(R @ I - lam * I).max():.1e}")
