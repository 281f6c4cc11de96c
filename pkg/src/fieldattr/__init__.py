"""Field attribution for slow collective observables."""

__version__ = "0.1.0"
