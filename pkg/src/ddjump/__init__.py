"""Exact chain, fluid, diffusion and jump-diffusion simulation of density dependent Markov chains."""
from .network import (DensityFamily, Network, NetworkError, Reaction, ab, chain_intensity,
                      conservation_laws, density_rates, drift, load_network, parse_network)
from .trajectory import RngStream, Trajectory

__version__ = "0.1.0"

__all__ = [
    "DensityFamily", "Network", "NetworkError", "Reaction", "RngStream", "Trajectory",
    "ab", "chain_intensity", "conservation_laws", "density_rates", "drift", "load_network",
    "parse_network", "__version__",
]
