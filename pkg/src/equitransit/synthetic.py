"""A small synthetic city for demos and end-to-end tests."""

from __future__ import annotations

import csv
import math
import random
from pathlib import Path

# A dense, low-income, low-car-ownership core and an affluent suburb, five
# tracts each, scattered uniformly over a disc.  With ``knn:2`` the default seed
# yields a 28-arc network small enough for brute-force certification.
CORE = (35.045, -85.310, 1.5)
SUBURB = (35.045, -85.200, 2.5)
DEFAULT_SEED = 5


def _scatter(rng: random.Random, lat0: float, lon0: float, radius_km: float, count: int) -> list[tuple[float, float]]:
    out = []
    for _ in range(count):
        theta = rng.uniform(0.0, 2 * math.pi)
        r = radius_km * math.sqrt(rng.uniform(0.05, 1.0))
        dlat = r * math.sin(theta) / 111.195
        dlon = r * math.cos(theta) / (111.195 * math.cos(math.radians(lat0)))
        out.append((round(lat0 + dlat, 6), round(lon0 + dlon, 6)))
    return out


def two_cluster_city(out_dir: str | Path, seed: int = DEFAULT_SEED) -> tuple[Path, Path]:
    """Write ``tracts.csv`` and ``od.csv`` for a 10-tract, two-cluster city."""
    rng = random.Random(seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    core = _scatter(rng, *CORE, 5)
    suburb = _scatter(rng, *SUBURB, 5)
    rows = []
    for i, (lat, lon) in enumerate(core):
        rows.append((f"C{i}", lat, lon, rng.randint(18000, 32000), round(rng.uniform(0.35, 0.6), 3)))
    for i, (lat, lon) in enumerate(suburb):
        rows.append((f"S{i}", lat, lon, rng.randint(85000, 140000), round(rng.uniform(0.9, 0.99), 3)))
    tracts = out / "tracts.csv"
    with open(tracts, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["tract_id", "lat", "lon", "median_income", "vehicle_rate"])
        writer.writerows(rows)
    od = out / "od.csv"
    ids = [r[0] for r in rows]
    with open(od, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["origin", "destination", "count"])
        for o in ids:
            for d in ids:
                if o == d:
                    continue
                same = o[0] == d[0]
                writer.writerow([o, d, rng.randint(20, 60) if same else rng.randint(1, 15)])
    return tracts, od
