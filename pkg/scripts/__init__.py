"""laplace-asym: Laplace asymptotics under vanishing phase perturbations."""

__version__ = "0.1.0"
