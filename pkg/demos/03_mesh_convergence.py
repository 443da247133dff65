"""
Convergence in the mesh size
============================

Fix beta, refine uniformly and compare against a reference solution two
levels finer than the finest mesh in the sweep. Larger beta means a
smoother solution and a better rate. The shunt model is the rough limit.
"""
from pathlib import Path

from eitcem import SweepConfig, emit_report, sweep_h, uniform_hierarchy

# A lighter version of the full study: levels 1-4 against level 6.
config = SweepConfig(h_levels=(1, 2, 3, 4), reference_depth=6)
meshes = uniform_hierarchy(config, config.reference_depth)
print("reference mesh:", meshes[-1].n_vertices, "vertices")

out = Path("demo_output")
for beta in (10.0, 1.0, 0.1, 0.01, "shunt"):
    report = sweep_h(config, beta, meshes=meshes)
    slopes = ", ".join(f"{n} {report.slope(n):.3f}" for n in report.columns)
    print(f"beta={beta}: {slopes}")
    emit_report(report, out, "svg", stem=f"sweep_h_{beta}")

# The measurement map converges at roughly twice the H1 rate, as in the
# contact impedance sweep.
