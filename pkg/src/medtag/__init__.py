"""Constrained tag-insertion decoding, span metrics and pretraining data tools."""
