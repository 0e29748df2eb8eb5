# urnlab/models/__init__.py

from .urn import (
    Color,
    CltVariances,
    ModelKind,
    ModelTag,
    ReinforcementKind,
    ReinforcementSpec,
    SDeltaWindow,
    UrnState,
)
from .threshold import (
    AdaptiveEstimates,
    ConvergenceMode,
    PolicyKind,
    ThresholdEmission,
    ThresholdPolicy,
)
from .trajectory import (
    INF,
    CoupledRun,
    CrossingRecord,
    GridPoint,
    RunConfig,
    TrajectoryRecord,
    linear_grid,
    pow2_grid,
)
from .statistics import (
    CltReplication,
    CltStatistic,
    CltSummary,
    DriftDiagnostic,
    HarmonicPoint,
    KsResult,
    MomentEstimate,
)
from .verification import (
    AcceptanceFile,
    Comparison,
    CriterionKind,
    ReportRow,
    SuiteAcceptance,
    SuiteId,
    SuiteReport,
    SuiteSpec,
    Verdict,
    VerificationReport,
)
from .manifest import BatchResult, Manifest
from .experiment import ExperimentFile, SweepAxes, parse_grid

__all__ = [
    "Color",
    "CltVariances",
    "ModelKind",
    "ModelTag",
    "ReinforcementKind",
    "ReinforcementSpec",
    "SDeltaWindow",
    "UrnState",
    "AdaptiveEstimates",
    "ConvergenceMode",
    "PolicyKind",
    "ThresholdEmission",
    "ThresholdPolicy",
    "INF",
    "CoupledRun",
    "CrossingRecord",
    "GridPoint",
    "RunConfig",
    "TrajectoryRecord",
    "linear_grid",
    "pow2_grid",
    "CltReplication",
    "CltStatistic",
    "CltSummary",
    "DriftDiagnostic",
    "HarmonicPoint",
    "KsResult",
    "MomentEstimate",
    "AcceptanceFile",
    "Comparison",
    "CriterionKind",
    "ReportRow",
    "SuiteAcceptance",
    "SuiteId",
    "SuiteReport",
    "SuiteSpec",
    "Verdict",
    "VerificationReport",
    "BatchResult",
    "Manifest",
    "ExperimentFile",
    "SweepAxes",
    "parse_grid",
]
