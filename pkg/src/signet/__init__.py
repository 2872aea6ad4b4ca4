"""SignReLU network toolkit.

Building blocks:

- ``signet.nets``       feedforward SignReLU networks (eval, norms, backprop, SGD)
- ``signet.gates``      exact reciprocal / division gates and ratio composition
- ``signet.kernels``    kernel-induced marginal densities and their integral form
- ``signet.approx``     Maurey-sampled shallow approximants and rate sweeps
- ``signet.schedule``   forward-process noise schedules
- ``signet.targets``    box-supported target densities with certified bounds
- ``signet.diffusion``  DDPM forward/backward processes, Bayes oracle, training
- ``signet.kl``         KL divergence estimators and the terminal-step check
- ``signet.bounds``     closed-form risk/covering/log-density bound calculators
- ``signet.experiments`` trend experiments wiring the pieces together
- ``signet.cli``        reproducible experiment command line
"""

__version__ = "0.1.0"
