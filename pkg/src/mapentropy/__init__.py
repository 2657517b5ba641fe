"""Entropies of quantum channels: Choi matrices, map and minimal output entropies,
Haar averages, inequality checks and a conjecture search harness."""

__version__ = "0.1.0"

from .channel import (
    Channel,
    adjoint_channel,
    choi_from_kraus,
    compose,
    depolarizing,
    kraus_from_choi,
    random_bistochastic,
    random_cptp,
    tensor_channels,
    transpose_channel,
)
from .entropy import (
    entropy_exchange_state,
    map_entropy,
    min_output_entropy_2,
    renyi_entropy,
    von_neumann_entropy,
)
