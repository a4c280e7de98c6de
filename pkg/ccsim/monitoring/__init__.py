"""
ccsim Monitoring

Prometheus-compatible counters for schedule building, verification and sweeps.

Usage:
    from ccsim.monitoring import get_metrics

    metrics = get_metrics()
    metrics.fallback_activations.inc()
"""

from .metrics import MetricsCollector, get_metrics

__all__ = [
    "MetricsCollector",
    "get_metrics",
]
