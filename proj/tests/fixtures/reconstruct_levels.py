#!/usr/bin/env python3
"""Rebuild unrounded weekly-growth levels from a 2-decimal raw DiD reference table.

Every level and derived column in the reference files is rounded to two
decimals, so recomputing differences from the rounded levels does not always
reproduce the printed differences. This script searches, in exact integer
units of 1e-4, for levels that

  * round to every printed level,
  * give treated and control differences that round to the printed values,
  * give a difference-in-differences that rounds to the printed value, and
    equals it exactly whenever that is achievable.

Among the feasible points it keeps the one with the smallest difference-in-
differences error, then the one closest to the printed levels.
Output rows are written next to the inputs as *_levels.csv.
"""
import csv
import sys
from pathlib import Path

HALF = 49  # strictly inside the +/-0.005 rounding interval


def units(text):
    sign = -1 if text.strip().startswith("-") else 1
    whole, _, frac = text.strip().lstrip("+-").partition(".")
    frac = (frac + "00")[:2]
    return sign * (int(whole) * 10000 + int(frac) * 100)


def reconstruct(row):
    a, b, c, e = (units(row[k]) for k in
                  ("dy_order_day", "dy_after", "dy_ctrl_order_day", "dy_ctrl_after"))
    dt, dc, dd = (units(row[k]) for k in ("diff_treated", "diff_ctrl", "diff_in_diff"))
    best = None
    for da in range(-HALF, HALF + 1):
        for db in range(-HALF, HALF + 1):
            t = (b + db) - (a + da)
            if abs(t - dt) > HALF:
                continue
            for ddd in range(-HALF, HALF + 1):
                ctrl = t - (dd + ddd)
                if abs(ctrl - dc) > HALF:
                    continue
                # E = C + ctrl has to stay inside E's interval; the cheapest
                # split of the gap k between C and E costs |k|.
                k = c + ctrl - e
                if abs(k) > 2 * HALF:
                    continue
                dcc = -min(k, HALF) if k > 0 else -max(k, -HALF)
                de = dcc + k
                cost = (abs(ddd), abs(da) + abs(db) + abs(dcc) + abs(de))
                if best is None or cost < best[0]:
                    best = (cost, a + da, b + db, c + dcc, e + de)
    if best is None:
        raise SystemExit(f"no consistent levels for {row['date']}")
    return best[1:]


def main(paths):
    for path in map(Path, paths):
        with path.open() as f:
            rows = list(csv.DictReader(f))
        out = path.with_name(path.name.replace("_reference", "_levels"))
        with out.open("w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["date", "n_counties", "dy_order_day", "dy_after",
                        "dy_ctrl_order_day", "dy_ctrl_after"])
            for row in rows:
                lv = reconstruct(row)
                w.writerow([row["date"], row["n_counties"]] + [f"{v / 10000:.4f}" for v in lv])


if __name__ == "__main__":
    main(sys.argv[1:] or ["raw_did_cases_reference.csv", "raw_did_fatalities_reference.csv"])
