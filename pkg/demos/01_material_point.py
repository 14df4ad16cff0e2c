"""
Material point responses
========================

Stress-strain curves of the compressible Mooney-Rivlin reference and an
untrained PANN under uniaxial stretch, plus the normalization at C = I.
"""

import numpy as np

from panfem.calibration import init_params
from panfem.diagnostics import model_energy
from panfem.material import MR_COMPRESSIBLE, MooneyRivlin, pann_build, pk2

mr = MooneyRivlin(MR_COMPRESSIBLE)
pann = pann_build(init_params(8, seed=0))

# both potentials vanish, with their stress, in the reference state
for name, m in (("MR", mr), ("PANN8", pann)):
    print(f"{name:6s} W(I) = {model_energy(m, np.eye(3)):+.1e}  "
          f"max|S(I)| = {np.abs(pk2(m, np.eye(3))).max():.1e}")

# axial PK2 stress with the lateral stretch held at one
print("\n lambda   S11 (MR)    S11 (PANN8)")
for lam in np.linspace(0.8, 1.6, 9):
    C = np.diag([lam**2, 1.0, 1.0])
    print(f"{lam:7.2f} {pk2(mr, C)[0, 0]:11.2f} {pk2(pann, C)[0, 0]:11.4f}")
