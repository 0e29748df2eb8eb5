import logging
from pathlib import Path
from typing import Optional

from opentelemetry import trace
from opentelemetry.exporter.otlp.proto.grpc.trace_exporter import \
    OTLPSpanExporter
from opentelemetry.instrumentation.logging import LoggingInstrumentor
from opentelemetry.sdk.resources import Resource
from opentelemetry.sdk.trace import TracerProvider
from opentelemetry.sdk.trace.export import BatchSpanProcessor
from prometheus_client import (REGISTRY, Counter, Gauge, Histogram,
                               write_to_textfile)

logger = logging.getLogger(__name__)

INFO = Gauge(
    "urnlab_app_info", "urnlab application information.", [
        "app_name", "version"]
)
STEPS = Counter(
    "urnlab_steps_total", "Total count of simulated urn steps by model.", [
        "model", "app_name"]
)
REPLICATIONS = Counter(
    "urnlab_replications_total", "Total count of completed replications by model.", [
        "model", "app_name"]
)
THRESHOLD_CLAMPS = Counter(
    "urnlab_threshold_clamps_total",
    "Total count of emitted threshold pairs clamped to restore rho2 <= rho1.",
    ["policy", "app_name"],
)
BATCH_FAILURES = Counter(
    "urnlab_batch_failures_total",
    "Total count of aborted batches by exception type",
    ["exception_type", "app_name"],
)
REPLICATION_TIME = Histogram(
    "urnlab_replication_duration_seconds",
    "Histogram of replication wall time by model (in seconds)",
    ["model", "app_name"],
)
SUITE_CRITERIA = Counter(
    "urnlab_suite_criteria_total",
    "Total count of evaluated verification criteria by suite and verdict",
    ["suite", "verdict", "app_name"],
)

_app_name = "urnlab"


def app_name() -> str:
    return _app_name


def register_app(name: str, version: str) -> None:
    global _app_name
    _app_name = name
    INFO.labels(app_name=name, version=version).set(1)


def write_metrics(path: Path) -> None:
    """Dump the registry in the text exposition format"""
    write_to_textfile(str(path), REGISTRY)


def tracer() -> trace.Tracer:
    return trace.get_tracer("urnlab")


def setting_otlp(app_name: str, endpoint: Optional[str], log_correlation: bool = True) -> None:
    # set the service name to show in traces
    resource = Resource.create(attributes={
        "service.name": app_name,
        "compose_service": app_name
    })

    # set the tracer provider
    provider = TracerProvider(resource=resource)
    trace.set_tracer_provider(provider)

    if endpoint:
        provider.add_span_processor(BatchSpanProcessor(
            OTLPSpanExporter(endpoint=endpoint)))
        logger.info(f"Exporting traces to {endpoint}")

    if log_correlation:
        LoggingInstrumentor().instrument(set_logging_format=False)
