"""Three-scale numerics for a mean-field dissipative spin chain.

``macroflow`` integrates the mean magnetization, ``mesoflow`` the Gaussian
fluctuation covariance, ``microsim`` the exact finite-N master equation and
``fockstat`` the single-mode stationary-state problem.
"""
from .algebra import (CanonicalFrame, KossakowskiSpec, canonical_frame,
                      rotate_scenario, validate_kossakowski)
from .errors import (DegenerateLength, MeanFieldError, NoStationaryState,
                     NotExchangeSymmetric, NotHermitian, NotPositive, SizeExceeded,
                     StepFailure)

__version__ = "0.1.0"
