"""Extended-precision reference values for the reflected Gaussian plume.

Writes tests/fixtures/plume_oracle.csv. Inputs are drawn at random and
stored as exact f64 reprs; the expected concentration is evaluated with
mpmath at 50 significant digits and rounded once to f64.

    python3 scripts/plume_oracle.py
"""
import csv
import random
from pathlib import Path

import mpmath as mp

mp.mp.dps = 50


def plume(rate, crosswind, vertical, height, sigma_h, sigma_v, u, abl, n_refl, density):
    rate, dh, dv, H, sh, sv, u, P, rho = map(
        mp.mpf, (rate, crosswind, vertical, height, sigma_h, sigma_v, u, abl, density)
    )
    total = mp.exp(-dv**2 / (2 * sv**2))
    for j in range(1, n_refl + 1):
        a = 2 * ((j + 1) // 2) * P + (-1) ** j * (dv + H) - H
        b = 2 * (j // 2) * P + (-1) ** (j - 1) * (dv + H) + H
        total += mp.exp(-a**2 / (2 * sv**2)) + mp.exp(-b**2 / (2 * sv**2))
    pref = mp.mpf(10) ** 6 / rho * rate / (2 * mp.pi * u * sh * sv)
    return pref * mp.exp(-dh**2 / (2 * sh**2)) * total


def main():
    rng = random.Random(20240611)
    rows = []
    # level-M-like point: 50 m downwind on the centreline at source height,
    # case-2 dispersion with gamma = 0.3 rad, w = h = 1.
    import math
    sig = 50 * math.tan(0.3) + 1.0
    rows.append((0.00039, 0.0, 0.0, 5.0, sig, sig, 6.0, 1000.0, 3, 0.656))
    while len(rows) < 1000:
        sigma_h = rng.uniform(0.3, 60.0)
        sigma_v = rng.uniform(0.3, 40.0)
        height = rng.uniform(0.0, 20.0)
        abl = rng.uniform(height + 5.0, 2000.0)
        rows.append((
            10 ** rng.uniform(-6, -1),
            sigma_h * rng.uniform(-5.0, 5.0),
            sigma_v * rng.uniform(-4.0, 4.0),
            height,
            sigma_h,
            sigma_v,
            rng.uniform(0.2, 15.0),
            abl,
            rng.randint(0, 8),
            rng.uniform(0.6, 0.75),
        ))
    out = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "plume_oracle.csv"
    with out.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rate", "crosswind", "vertical", "height", "sigma_h", "sigma_v",
                    "wind_speed", "abl_height", "n_refl", "gas_density", "expected"])
        for r in rows:
            w.writerow([repr(float(v)) if i != 8 else v for i, v in enumerate(r)]
                       + [repr(float(plume(*r)))])


if __name__ == "__main__":
    main()
