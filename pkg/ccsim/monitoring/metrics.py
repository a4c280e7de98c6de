"""
ccsim Metrics Collector

Counts what the simulator does so sweeps can report how often the rarer
paths (fallback splits, verification failures, dominance violations) fire.
Exported in the Prometheus text format.

Metrics collected:
    ┌──────────────────────────────────────────────────────────┐
    │  Counters:                                                │
    │  ├─ ccsim_schedules_built_total                           │
    │  ├─ ccsim_transmissions_total{stage}                      │
    │  ├─ ccsim_fallback_activations_total                      │
    │  ├─ ccsim_verification_failures_total                     │
    │  └─ ccsim_dominance_violations_total                      │
    │                                                           │
    │  Histograms:                                              │
    │  └─ ccsim_schedule_build_seconds                          │
    └──────────────────────────────────────────────────────────┘
"""

from functools import lru_cache
from pathlib import Path

from prometheus_client import CollectorRegistry, Counter, Histogram
from prometheus_client import write_to_textfile as _write_to_textfile


class MetricsCollector:
    """
    Holds the simulator's metrics in a private registry.

    Example:
        metrics = get_metrics()
        metrics.schedules_built.inc()
        metrics.write_textfile("sweep.prom")
    """

    def __init__(self, registry: CollectorRegistry | None = None):
        self.registry = registry or CollectorRegistry()
        self.schedules_built = Counter(
            "ccsim_schedules_built",
            "Delivery schedules built",
            registry=self.registry,
        )
        self.transmissions = Counter(
            "ccsim_transmissions",
            "Broadcast payloads emitted, by stage",
            ["stage"],
            registry=self.registry,
        )
        self.fallback_activations = Counter(
            "ccsim_fallback_activations",
            "Schedules whose coded payloads had to be split into singletons",
            registry=self.registry,
        )
        self.verification_failures = Counter(
            "ccsim_verification_failures",
            "verify_all runs that reported unrecoverable fragments",
            registry=self.registry,
        )
        self.dominance_violations = Counter(
            "ccsim_dominance_violations",
            "Sampled rates above the worst-rate formula",
            registry=self.registry,
        )
        self.build_seconds = Histogram(
            "ccsim_schedule_build_seconds",
            "Wall time of build_schedule",
            buckets=(0.001, 0.005, 0.01, 0.05, 0.1, 0.5, 1.0, 5.0),
            registry=self.registry,
        )

    def value(self, name: str, labels: dict[str, str] | None = None) -> float:
        """Current value of a sample, 0.0 when never observed"""
        result = self.registry.get_sample_value(name, labels or {})
        return result if result is not None else 0.0

    def write_textfile(self, path: str | Path) -> None:
        """Write all metrics in textfile-collector format"""
        _write_to_textfile(str(path), self.registry)


@lru_cache
def get_metrics() -> MetricsCollector:
    """Process-wide collector"""
    return MetricsCollector()
