"""
Calibrating a PANN8
===================

Samples the compressible Mooney-Rivlin model on uniaxial, equibiaxial and
simple shear paths, trains eight neurons with ADAM and reports the losses on
the calibration data and on the combined shear-tension test path. The
trained weights are written to ``pann8.json``.
"""

import sys

import numpy as np

from panfem.calibration import (TrainConfig, calibration_dataset, sobolev_loss, test_dataset,
                                train_adam)
from panfem.fileio import write_weights
from panfem.material import MR_COMPRESSIBLE, MooneyRivlin

epochs = int(sys.argv[1]) if len(sys.argv) > 1 else 5000

gt = MooneyRivlin(MR_COMPRESSIBLE)
cal = calibration_dataset(gt)
test = test_dataset(gt)
print(f"{len(cal)} calibration samples, {len(test)} test samples")
J_cal = np.sqrt(np.linalg.det(cal.C))
J_test = np.sqrt(np.linalg.det(test.C))
print(f"J range: calibration [{J_cal.min():.2f}, {J_cal.max():.2f}], "
      f"test [{J_test.min():.2f}, {J_test.max():.2f}]")

res = train_adam(42, cal, TrainConfig(epochs=epochs), record_every=500)
for epoch, loss in res.history:
    print(f"epoch {epoch:5d}  log10 loss {np.log10(loss):6.2f}")

print(f"calibration log10 MSE {np.log10(sobolev_loss(res.params, cal)):.2f}")
print(f"test        log10 MSE {np.log10(sobolev_loss(res.params, test)):.2f}")
write_weights("pann8.json", res.params)
print("weights written to pann8.json")
