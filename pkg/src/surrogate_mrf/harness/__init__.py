"""Experiment configuration, orchestration and command-line entry point."""
