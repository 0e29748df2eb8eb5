# urnlab/services/__init__.py

from .urn_service import urn_service
from .threshold_service import threshold_service
from .simulation_service import simulation_service
from .stats_service import stats_service
from .verify_service import verify_service

__all__ = [
    "urn_service",
    "threshold_service",
    "simulation_service",
    "stats_service",
    "verify_service",
]
