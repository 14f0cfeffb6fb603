"""Survival analysis via case-base sampling.

Converts right-censored follow-up into labeled person-moments, fits
offset-corrected hazard models (feed-forward network, linear logistic, or
the Kaplan-Meier null), derives absolute-risk curves, and evaluates them
with censoring-weighted time-dependent metrics.
"""

__version__ = "0.1.0"

from .data import (
    CsvSchema,
    SplitSpec,
    SubjectRecord,
    SurvivalData,
    bootstrap_resample,
    load_survival_csv,
    split_dataset,
)
from .errors import (
    CBSurvError,
    ConfigurationError,
    DataError,
    NumericError,
    ParseError,
    SchemaError,
    ValidationError,
)
from .estimators import (
    CaseBaseLogisticRegression,
    CaseBaseNeuralNetwork,
    KaplanMeierCurve,
    KaplanMeierEstimator,
    RiskCurve,
    kaplan_meier,
    km_risk,
    load_model,
    model_from_dict,
    model_to_dict,
    risk_curve,
    save_model,
)
from .features import (
    FeatureMap,
    IdentityTerm,
    ProductTerm,
    TimeProductTerm,
    TimeSplineTerm,
)
from .metrics import (
    MetricCurve,
    PredictionMatrix,
    SuiteResult,
    auc_curve,
    auc_ipcw,
    brier_curve,
    brier_score,
    censoring_weights,
    default_eval_grid,
    evaluate_suite,
    integrated_brier,
    ipa,
    predictions_for,
)
from .model_selection import (
    BootstrapResult,
    GridSearchResult,
    SearchSpace,
    bootstrap_evaluate,
    default_search_space,
    grid_search,
)
from .network import (
    Gradients,
    NetworkConfig,
    NetworkParameters,
    TrainingBatch,
    TrainingHistory,
    adam_step,
    bce_loss,
    forward,
    gradient,
    init_network,
    train_network,
    train_on_sample,
)
from .pipeline import PipelineConfig, run_pipeline
from .sampling import (
    CaseBaseSample,
    relative_information,
    sample_case_base,
    sampling_offset,
)
from .simulation import (
    SimulationHazardSpec,
    cumulative_hazard,
    default_hazard_spec,
    generate_covariates,
    log_hazard,
    oracle_feature_map,
    sample_event_time,
    simulate_dataset,
)
from .splines import SplineBasisSpec, spline_basis

__all__ = [name for name in dir() if not name.startswith("_")]
