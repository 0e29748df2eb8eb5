from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, Field

from urnlab.models.trajectory import RunConfig


class SuiteId(str, Enum):
    """Verification suites, one per verified result"""
    T1 = "T1"
    T2 = "T2"
    T3 = "T3"
    T4 = "T4"
    T5 = "T5"
    T6 = "T6"
    T7 = "T7"
    T8 = "T8"
    T9 = "T9"
    T10 = "T10"


class Verdict(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    INFORMATIONAL = "informational"


class CriterionKind(str, Enum):
    EXACT = "exact"
    STATISTICAL = "statistical"


class Comparison(str, Enum):
    LT = "<"
    LE = "<="
    GT = ">"
    GE = ">="
    EQ = "=="


class SuiteAcceptance(BaseModel):
    """Pre-registered run sizes and thresholds for one suite"""
    replications: int = Field(ge=1, description="Replications per configuration")
    horizon: int = Field(ge=1, description="Steps per replication")
    thresholds: Dict[str, float] = Field(default_factory=dict, description="Named pass thresholds")
    boundary_variant: bool = Field(default=True, description="Also run the rho1 = rho2 informational variant where defined")


class AcceptanceFile(BaseModel):
    """Contents of the acceptance file"""
    seed: int = Field(default=1, ge=0, lt=2 ** 64)
    proxy_multiplier: int = Field(default=16, ge=2)
    suites: Dict[SuiteId, SuiteAcceptance]


class SuiteSpec(BaseModel):
    """A suite bound to its configurations and thresholds"""
    id: SuiteId
    theorem_ref: str = Field(description="Result the suite exercises")
    configs: List[RunConfig] = Field(description="Run templates; replication_index is set per replication")
    thresholds: Dict[str, float]
    replications: int = Field(ge=1)
    proxy_multiplier: int = Field(default=16, ge=2)
    verdict: Optional[Verdict] = Field(
        default=None, description="INFORMATIONAL for variants outside the result's hypotheses; otherwise set by run_suite"
    )


class ReportRow(BaseModel):
    """One evaluated criterion"""
    suite: SuiteId
    criterion: str
    kind: CriterionKind
    comparison: Comparison
    observed: Optional[float]
    threshold: float
    margin: Optional[float] = Field(description="Positive when the criterion holds")
    verdict: Verdict


class SuiteReport(BaseModel):
    suite: SuiteId
    theorem_ref: str
    rows: List[ReportRow]
    verdict: Verdict


class VerificationReport(BaseModel):
    seed: int
    suites: List[SuiteReport]

    @property
    def passed(self) -> bool:
        return all(s.verdict != Verdict.FAIL for s in self.suites)
