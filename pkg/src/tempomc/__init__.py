"""tempomc: transverse contraction of spatio-temporal tensor networks plus
Metropolis sampling of the resulting wave-function amplitudes.

The package is organized around a few layers:

* ``tensor_ops``  -- dense complex linear algebra (contraction, SVD, general
  eigendecomposition) shared by everything else.
* ``tmps``        -- temporal MPS/MPO containers and the two bond-truncation
  schemes (per-vector density-matrix compression and the two-sided
  reduced-transition-matrix truncation).
* ``network``     -- Trotterized Ising and random-unitary brickwork grids,
  sliced into spatial columns.
* ``engine``      -- environment sweeping, amplitude evaluation, and the
  thermodynamic-limit boundary fixed point.
* ``sampler``     -- Metropolis sampling, local estimators, replica-swap
  Renyi-2 estimation, exact enumeration.
* ``analytics``   -- temporal entropies, cross-echo free energies, DQPT
  detection, and conformal reference formulas.
* ``oracle``      -- dense statevector and TEBD baselines used as exact
  references.
* ``cli``         -- batch front end (``tempomc run`` / ``tempomc compare``).
"""

__version__ = "0.1.0"

from . import tensor_ops, tmps, network, engine, sampler, analytics, oracle  # noqa: F401
