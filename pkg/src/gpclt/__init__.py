"""Fluctuations of bounded one-particle observables in the Gross-Pitaevskii regime.

Scattering solutions, Bogoliubov coefficients, limiting Gaussian laws and a
truncated Fock-space verification suite for the operator identities behind them.
"""

__version__ = "0.1.0"
