"""Neural reconstruction vs standard maximum-likelihood tomography.

The baseline parametrizes the state through a Cholesky-like factor
(physical by construction) and maximizes the same measurement
likelihood by gradient ascent. On a shared dataset both methods land
within statistical reach of each other; the interesting contrast is the
auxiliary-unit count: with a single auxiliary unit the network can
represent at most rank-2 states, so it cannot purify a p=0.5
depolarized Bell state (rank 4).

Run: python3 demos/04_maxlik_baseline_comparison.py
(takes a few minutes)
"""

import numpy as np

from ndotomo.datagen import MeasurementProtocol, nine_bases, sample_dataset
from ndotomo.maxlik import maxlik_fit
from ndotomo.model import materialize
from ndotomo.qcore import canonical_state, depolarize, fidelity
from ndotomo.training import TrainConfig, train

target = depolarize(canonical_state("bell_phi_plus"), 0.5)
dataset = sample_dataset(target,
                         MeasurementProtocol(tuple(nine_bases()), 3000, seed=2))
print(f"dataset: {dataset.n_records} records from a p=0.5 depolarized Bell state")

baseline = maxlik_fit(dataset, seed=0)
fid_ml = fidelity(target, baseline.rho)
print(f"\nMaxLik baseline: fidelity {fid_ml:.4f} "
      f"({baseline.iterations} iterations, converged={baseline.converged})")

for n_aux in (1, 2):
    config = TrainConfig(n_hidden=1, n_aux=n_aux, epochs=50, batch_size=10, seed=9)
    report = train(dataset, config)
    rho = materialize(report.best_params)
    rank_eigs = np.sort(np.linalg.eigvalsh(rho.matrix))[::-1]
    print(f"\nNDO with n_aux={n_aux}: fidelity {fidelity(target, rho):.4f}")
    print(f"  eigenvalues {np.round(rank_eigs, 4)}"
          f"   (true: {np.round(np.sort(np.linalg.eigvalsh(target.matrix))[::-1], 4)})")
    if n_aux == 1:
        print("  a single auxiliary unit caps the rank at 2: "
              "the two smallest eigenvalues are crushed")
