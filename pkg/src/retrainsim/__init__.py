"""Drift-aware model lifecycle simulation with per-phase energy accounting."""

__version__ = "0.1.0"

from .dataset import (  # noqa: E402
    BatchStream,
    DriftEvent,
    LabeledBatch,
    ScalerParams,
    Standardizer,
    SyntheticDriftSpec,
    apply_scaler,
    downsample,
    fit_scaler,
    generate_synthetic_stream,
    load_csv_stream,
    split_initial,
    write_csv_stream,
)
from .detect import (  # noqa: E402
    DetectorConfig,
    DetectorMethod,
    DriftVerdict,
    KSDriftDetector,
    PCAReducer,
    detect_drift,
    fit_pca,
    ks_pvalue,
    ks_statistic,
    project,
)
from .energy import (  # noqa: E402
    CpuTimeMeter,
    EnergyLedger,
    MeasurementScope,
    VirtualMeter,
    detector_overhead_pct,
    extrapolate_annual,
    ledger_add,
    measure_scope,
)
from .model import (  # noqa: E402
    ForestHyperparams,
    RandomForest,
    SearchSpace,
    gini_importances,
    predict_proba,
    randomized_search,
    roc_auc,
    train_forest,
)
from .policy import RetrainTrigger, TrainingWindow, WindowPolicy, should_retrain, update_window  # noqa: E402
from .sim import LifecycleReport, SimulationConfig, run_experiment_matrix, run_lifecycle  # noqa: E402
from .stats import wilcoxon_signed_rank  # noqa: E402
