"""Experiment verbs: diagnostics, stage runs, output files and the manifest."""
