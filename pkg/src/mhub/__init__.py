"""mhub: Modelica-centric federated analytics with live virtual twins."""

__version__ = "0.1.0"
