"""Gaussian small-ball probabilities in l2 from an eigenvalue sequence."""

__version__ = "0.1.0"

from .errors import SmallBallError
from .spectrum import EigenSpectrum, TailModel, TruncationPolicy, build_spectrum, explicit, exponential, polynomial
from .series import SeriesValue, eval_I, eval_mu, eval_psi
from .inversion import AuxFunction, ThetaSolution, eval_rho, invert_mu, rho_function
from .asymptotics import SmallBallEstimate, dmz_estimate
from .oracle import OracleEstimate

__all__ = [
    "__version__",
    "SmallBallError",
    "EigenSpectrum",
    "TailModel",
    "TruncationPolicy",
    "build_spectrum",
    "explicit",
    "exponential",
    "polynomial",
    "SeriesValue",
    "eval_I",
    "eval_mu",
    "eval_psi",
    "AuxFunction",
    "ThetaSolution",
    "eval_rho",
    "invert_mu",
    "rho_function",
    "SmallBallEstimate",
    "dmz_estimate",
    "OracleEstimate",
]
