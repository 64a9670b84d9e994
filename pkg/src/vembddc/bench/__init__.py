"""Benchmark problems, configuration, suites and command-line entry point."""
