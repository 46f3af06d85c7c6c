"""Deterministic and sampling core: mass partitions, paths, trees, samplers, fragmentation."""
