"""Coreset task selection for derivative-free meta-policy learning.

The package is organized by concern:

- ``metacore.lqr``: discrete LQR costs, gradients, Riccati solutions
- ``metacore.zo``: two-point zeroth-order gradient estimation
- ``metacore.coreset``: facility-location task selection and weighting
- ``metacore.tasks``: task-pool generation (LQR and synthetic families)
- ``metacore.trainer``: the meta-training loop and adaptation probes
- ``metacore.experiments`` / ``metacore.cli``: reproducible experiment runs
"""

__version__ = "0.1.0"
