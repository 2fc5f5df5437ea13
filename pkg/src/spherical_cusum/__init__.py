"""
spherical-cusum: multiscale CUSUM change-point tests for time-indexed
spherical random fields.

Modules:
    harmonics   Legendre functions, real harmonics, Gauss grids, transforms
    fields      power spectra, mean scenarios, panel simulation
    cusum       studentized CUSUM surface, sup statistic, decisions
    pillowcase  Brownian pillowcase sampling and quantile calibration
    harness     Monte Carlo experiments and multiscale scans
    ingest      lat-lon temperature data to coefficient panels
    cli         command-line front end
"""

__version__ = "0.1.0"
