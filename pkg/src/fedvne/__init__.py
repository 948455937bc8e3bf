"""Multi-domain virtual network embedding simulator with federated training."""

__version__ = "0.1.0"
