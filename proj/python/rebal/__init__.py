"""Internal multi-portfolio rebalancing processes.

Thin python surface over the C++ core: problem validation, the banker /
linear / greedy / grouped processes, the market-invariant (biproportional)
solver with closed-form small cases, and the simulation study helpers.
"""

from ._rebal import *  # noqa: F401,F403
from ._rebal import __doc__ as _core_doc  # noqa: F401
