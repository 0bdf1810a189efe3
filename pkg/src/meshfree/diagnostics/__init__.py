"""Moment tables, convergence, spectra, modal response and timing for any operator provider."""
