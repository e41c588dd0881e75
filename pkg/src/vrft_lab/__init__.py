"""Data-driven controller synthesis from input-output records, a surrogate
building-thermal plant to exercise it against, and max-min data-poisoning
tooling for the training datasets."""

__version__ = "0.1.0"

from .lti import (
    RationalTransferFunction,
    SignalSeries,
    StateSpace,
    frequency_response,
    h2_norm_sq,
    inverse_filter,
    is_stable,
    reduce_tf,
    simulate_filter,
    tf_arith,
)
from .vrft import (
    ControllerParams,
    IoDataset,
    ReferenceModel,
    make_prefilter,
    make_reference_model,
    model_reference_gap,
    realize_controller,
    synthesize,
)
from .plant import (
    ExcitationConfig,
    ExogenousTraces,
    PlantState,
    ThermalPlantConfig,
    generate_excitation,
    generate_occupancy,
    run_closed_loop,
    run_open_loop,
    step_plant,
)
from .attack import (
    AttackBudget,
    AttackProblem,
    AttackResult,
    make_budget,
    run_attack,
)
from .metrics import MetricsReport, avg_psd, classify_good, rmse, summarize, welch_psd

__all__ = [name for name in dir() if not name.startswith("_")]
