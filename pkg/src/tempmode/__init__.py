"""Temporal-mode reconstruction from phase-averaged homodyne waveforms."""
