"""Workload runner, result emitters and the command line."""
