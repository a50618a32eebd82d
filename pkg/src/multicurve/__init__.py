"""Multiple-curve term-structure engine with scheduled jumps.

Submodules: ``curve`` (maturity measure and pricing kernel), ``affine`` (affine
consistency conditions and transforms), ``models`` (worked model families),
``sim`` (exact path simulation and martingale tests), ``checker`` (general
drift-condition checks and the market-model embedding), ``market`` (a Gaussian
market-model instance and its simulation) and ``cli``.
"""

from .curve import (DiscontinuityCalendar, ForwardCurve, ForwardCurveField, SpreadState, TenorSet,
                    bond_price, eta_integrate, forward_ibor_rate, fra_price, spread_from_curves)
from .errors import ConfigError, DomainError, IntegrabilityError, NumericalError, UnsupportedLawError

__version__ = "0.1.0"
