"""Block-autoregressive discrete diffusion for graph generation."""

__version__ = "0.1.0"
