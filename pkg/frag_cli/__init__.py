"""Command-line runner for fragmentation experiments."""
