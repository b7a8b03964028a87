"""Instruction-driven video reframing toolkit.

Pipeline stages: content-based scene cut detection, salient-object
selection (heuristic or via a chat-completion model), per-scene layout
and effect planning, crop/zoom/fade rendering, and a saliency-map
evaluation harness (MAE, max-F, max-E, S-measure).
"""

__version__ = "0.1.0"
