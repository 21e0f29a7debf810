"""Correctness oracles: interleaving explorer, schedule contracts, audits."""
