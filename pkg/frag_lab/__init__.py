"""Experiment workers: replicate execution, statistics and the three verification labs."""
