"""Battery-health-aware scheduling for warehouse robot fleets."""

__version__ = "0.1.0"
