from typing import Dict, List, Optional

from pydantic import BaseModel, Field

from urnlab.models.trajectory import TrajectoryRecord


class Manifest(BaseModel):
    """Provenance of one batch or command invocation"""
    config_hash: str = Field(description="SHA-256 of the canonicalized configuration")
    seed: int
    replications: int
    replication_indices: List[int] = Field(default_factory=list)
    tool_version: Dict[str, str] = Field(default_factory=dict, description="urnlab, numpy and scipy versions")
    proxy_multiplier: Optional[int] = None
    thresholds: Dict[str, Dict[str, float]] = Field(default_factory=dict, description="Suite thresholds snapshot")
    authoritative: bool = Field(default=True, description="False when the batch aborted with partial results")
    wall_time_seconds: float = 0.0


class BatchResult(BaseModel):
    """Records of a batch ordered by replication index, with provenance"""
    records: List[TrajectoryRecord]
    manifest: Manifest

    @property
    def authoritative(self) -> bool:
        return self.manifest.authoritative
