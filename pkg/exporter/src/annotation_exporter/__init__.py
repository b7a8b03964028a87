"""Keyframe object grounding and annotation export.

Runs a tagger -> grounded segmenter -> caption scorer triple on each
scene's keyframe and writes the annotation JSON the reframing pipeline
consumes.  Model triples are configuration: the built-in color-region
triple needs no weights and keeps the tool hermetic; heavier
open-vocabulary models can be registered under new names.
"""

__version__ = "0.1.0"
