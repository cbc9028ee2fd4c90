"""Amortized Shapley explanations for black-box models on Z_q^n.

Sketch a model once as a sparse Fourier spectrum, then explain any number of
query sequences (SHAP values and interaction indices) at a per-query cost
independent of the sequence length.
"""

from .errors import (
    AmortizedShapError,
    BridgeIOError,
    CapacityError,
    ConfigurationError,
    ContractViolationError,
    FormatError,
    NumericalConsistencyError,
    ProtocolError,
    UndefinedCorrelationError,
)
from .qary import (
    DenseLandscape,
    FourierSpectrum,
    MobiusTransform,
    QaryVector,
    SetMobius,
    dense_fourier,
    hamming_weight,
    inverse_fourier,
    inverse_qary_mobius,
    inverse_set_mobius,
    leq,
    qary_mobius_dense,
    scatter,
    set_mobius,
    sub,
)
from .models import (
    ModelHandle,
    SyntheticLandscapeSpec,
    dense_landscape_from_model,
    eval_batch,
    make_synthetic,
    make_trig3_fixture,
    model_from_spectrum,
    trig3_spectrum,
)
from .bridge import BridgeClient, bridge_connect
from .sketch import (
    BinGraph,
    QueryPlan,
    SketchConfig,
    SketchDiagnostics,
    compute_bins,
    load_sketch,
    load_sketch_bundle,
    peel,
    plan_queries,
    save_sketch,
    sketch,
)
from .explain import (
    AggregateReport,
    ExplanationReport,
    aggregate,
    empty_coalition_value,
    explain,
    explain_many,
    faith_shap,
    fourier_to_mobius,
    shap_values,
    shift_spectrum,
    value_function,
)
from .oracles import (
    RuntimeLedger,
    brute_force_faith_shap,
    brute_force_shap,
    monte_carlo_shap,
    qary_to_set_mobius,
    run_benchmark,
    score_predictions,
    uniform_value_table,
)

__version__ = "0.1.0"
