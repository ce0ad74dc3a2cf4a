"""Multimodal icon annotation: view-hierarchy text fused into an icon detector."""

__version__ = "0.1.0"
