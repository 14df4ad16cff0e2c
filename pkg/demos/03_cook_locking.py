"""
Cook's membrane and volumetric locking
======================================

Vertical tip displacement of the tapered cantilever for the displacement
element and both mixed elements, with the nearly incompressible material.
The displacement element stiffens badly on coarse meshes while the two mixed
elements agree with each other at every refinement level.
"""

from panfem.material import MR_NEARLY_INCOMPRESSIBLE, MooneyRivlin
from panfem.scene import cook_scene
from panfem.solver import static_driver

model = MooneyRivlin(MR_NEARLY_INCOMPRESSIBLE)

print("  n   elements      H1        GJ       IIIJ")
for n in (2, 4, 8, 16):
    scene = cook_scene(n, p=100.0)
    uz = [static_driver(scene, model, form).probes["A"][-1][2] for form in ("H1", "GJ", "IIIJ")]
    print(f"{n:3d} {scene.mesh.n_elements:8d} " + " ".join(f"{u:9.4f}" for u in uz))
