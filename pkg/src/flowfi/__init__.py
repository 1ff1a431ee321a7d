"""Deterministic fault-injection laboratory for Real NVP anomaly detectors.

The package executes normalizing-flow anomaly detectors under simulated
radiation faults (zeroed values, Gaussian corruption, IEEE 754 binary32
bit flips) injected either into stored parameters or into forward-pass
activations, and measures silent-data-corruption and detected-error
rates across seeded, exactly reproducible campaigns.
"""

from .campaign import (
    BitCensus,
    CampaignConfig,
    ExperimentDescriptor,
    Histogram,
    ModelRef,
    PlanPoint,
    RESULTS_HEADER,
    ResultRow,
    bit_census,
    campaign_config_from_dict,
    emit_plot_data,
    expand_grid,
    make_point,
    masked_output_histogram,
    parse_campaign_config,
    read_results_csv,
    run_campaign,
    write_results_csv,
)
from .errors import (
    ConfigurationError,
    FlowFiError,
    MetricUndefinedError,
    ModelLoadError,
)
from .faults import (
    ActivationFilter,
    BitFlip,
    BitSelector,
    Direction,
    InjectionRecord,
    InjectionReport,
    LayerScope,
    Method,
    OutputInjectionPlan,
    OutputVariable,
    RandomFault,
    SignFilter,
    Snapshot,
    StateInjectionPlan,
    StateVariable,
    Zeros,
    flip_bit,
    forward_with_output_injection,
    inject_states,
    plan_output_hooks,
    resolve_output_plan,
    restore,
    select_targets,
    snapshot,
)
from .metrics import (
    BaselineRecord,
    DuePolicy,
    ExperimentOutcome,
    Rates,
    SdcVariant,
    build_correct_set,
    sdc_rate_aggregate,
    sdc_rate_exp,
)
from .model import (
    DUE,
    CouplingLayer,
    FcLayer,
    Label,
    ModelDefinition,
    ModelState,
    classify,
    coupling_forward,
    coupling_inverse,
    inverse_transform,
    log_prob,
    predict_batch,
    transform,
)
from .modelio import (
    Dataset,
    GridEntry,
    SyntheticSpec,
    build_model_grid,
    calibrate_threshold,
    generate_synthetic,
    identity_model,
    load_dataset,
    load_model,
    new_model,
    save_model,
    synth_split,
)
from .numeric import ActivationKind, fc_forward
from .rng import RandomStream, derive_stream, fnv1a64, mix64

__version__ = "0.1.0"
