"""QoS-constrained service composition for mobile ad hoc networks."""

__version__ = "0.1.0"
