__version__ = "0.1.0"

__all__ = [
    "classical_dynamics",
    "config",
    "errors",
    "experiment",
    "fitting",
    "propagators",
    "quantum_state",
    "regime_classifier",
    "semiclassical_diagnostics",
    "storage",
]
