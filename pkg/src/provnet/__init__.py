"""Provider patient-sharing networks and service-leakage analysis."""

__version__ = "0.1.0"
