"""Latent wet/dry state inference and spell analysis for gridded daily rainfall.

The package discretizes daily rainfall on a landmasked grid into binary
wet/dry states with a lattice Markov-random-field prior, clusters days and
locations into canonical spatial/temporal patterns, estimates pattern
transition dynamics, and detects active/break and wet/dry spells at
all-India, regional and grid scales.
"""

__version__ = "0.1.0"
