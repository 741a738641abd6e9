"""gibbslab: lattice Gibbs measures, Dobrushin-regime concentration bounds,
and desk-scale experiments that check the bounds against exact enumeration
or Monte Carlo estimates."""

__version__ = "0.1.0"
