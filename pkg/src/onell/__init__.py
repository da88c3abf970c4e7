"""The (1+(λ,λ)) genetic algorithm on OneMax and planted random 3-CNF.

The hot loops run in a compiled Cython kernel when it is available and fall
back to a pure-Python implementation otherwise (see :mod:`onell.kernel`).
"""

from .algorithms import (
    GaParams,
    Outcome,
    RunRecord,
    RunState,
    TraceRecord,
    crossover,
    ga_iteration,
    lambda_update,
    mutate,
    round_half_up,
    run_adaptive,
    run_fixed,
    run_opo_ea,
)
from .analysis import (
    avg_fitness,
    avg_fitness_gap,
    check_well_behaved,
    enumerate_or_sample_offspring,
    recommended_cap,
    sat_probability,
)
from .core import BitString, RandomSource, derive_seed, hamming_distance, sample_binomial, uniform_bitstring
from .kernel import kernel
from .problems import (
    Clause,
    Formula,
    MaxSat3,
    OneMax,
    PlantedInstance,
    generate_planted_instance,
    random_planted_instance,
    read_instance,
    write_instance,
)

__version__ = "0.1.0"

__all__ = [
    "BitString", "Clause", "Formula", "GaParams", "MaxSat3", "OneMax", "Outcome", "PlantedInstance",
    "RandomSource", "RunRecord", "RunState", "TraceRecord", "avg_fitness", "avg_fitness_gap",
    "check_well_behaved", "crossover", "derive_seed", "enumerate_or_sample_offspring", "ga_iteration",
    "generate_planted_instance", "hamming_distance", "kernel", "lambda_update", "mutate",
    "random_planted_instance", "read_instance", "recommended_cap", "round_half_up", "run_adaptive",
    "run_fixed", "run_opo_ea", "sample_binomial", "sat_probability", "uniform_bitstring",
    "write_instance",
]
