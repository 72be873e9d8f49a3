"""Experiment harness: ROC estimation, convergence statistics and spectral metrics."""
