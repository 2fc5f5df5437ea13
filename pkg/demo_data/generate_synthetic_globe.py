"""
Generate a synthetic monthly temperature globe for the ingest and scan demo.

Creates a 5-degree lat-lon grid for 1981-2020 whose annual means follow a
trending mean (model 2, linear in time) plus Gaussian noise, with a seasonal
climatology added per calendar month so that anomaly computation has work
to do.

Usage:
    python demo_data/generate_synthetic_globe.py

Output:
    demo_data/synthetic_globe.csv   (year,month,lat,lon,value)
"""

import os

import pandas as pd

from spherical_cusum.ingest import make_synthetic_globe, write_latlon_csv

# Resolve output path relative to this script.
_SCRIPT_DIR = os.path.dirname(os.path.abspath(__file__))
_OUTPUT_PATH = os.path.join(_SCRIPT_DIR, "synthetic_globe.csv")

FIRST_YEAR = 1981
LAST_YEAR = 2020
STEP_DEG = 5.0
LMAX = 8
MODEL = 2
ALPHA = 1.0
SEED = 7


def main() -> None:
    globe = make_synthetic_globe(
        FIRST_YEAR, LAST_YEAR, step_deg=STEP_DEG, lmax=LMAX,
        model=MODEL, alpha=ALPHA, seed=SEED,
    )
    write_latlon_csv(globe, _OUTPUT_PATH)

    df = pd.read_csv(_OUTPUT_PATH)
    print(f"Created {_OUTPUT_PATH} with {len(df)} cell-month rows.")
    print(f"  years {df['year'].min()}-{df['year'].max()}, "
          f"{df['lat'].nunique()} latitudes x {df['lon'].nunique()} longitudes")
    print("\nNext steps:")
    print(f"  spherical-cusum ingest --input {_OUTPUT_PATH} --lmax {LMAX} --out panel.bpanel")
    print("  spherical-cusum scan --panel panel.bpanel --lmin-list 0,1,2,3 --out scan.json")


if __name__ == "__main__":
    main()
