"""Law-level diagnostics for generative PDE solvers on the torus.

Spectral field algebra, empirical transport metrics, a pseudo-spectral 2D
Euler reference solver, toy sampler kernels with path diagnostics,
drift-defect residual certification, distributional scores, and rollout
error bounds, all verified against each other by the test suite and the
`lawbound verify-all` command.
"""

__version__ = "0.1.0"
