#!/usr/bin/env python3
"""Generate OpenFlights-format route fixtures.

Airport popularity follows a Zipf-like law, so after frequency-ranked string
indexing most routes sit near the origin of the (sourceAirport_idx,
destinationAirport_idx) plane. When the whole file is indexed and clustered at
once (the batch task form of the pipeline), k-means with k=3 puts a large
majority of rows (about 79% for the default seed) into one dominant cluster,
the qualitative shape seen on the real routes dataset. The stream form fits
its label ranks and centroids on the first batch only, so its shares are
flatter. Exact percentages depend on the seed and are not meant to match any
published figure.

Usage: gen_routes_fixture.py OUT.csv [--rows N] [--seed S] [--nulls]
"""

import argparse
import random

AIRLINES = [("BA", 1355), ("AF", 137), ("LH", 3320), ("AZ", 596), ("KL", 3090),
            ("IB", 2822), ("U2", 2297), ("FR", 4296), ("EK", 2183), ("QR", 4091)]
EQUIPMENT = ["744", "320", "319", "321", "738", "77W", "333", "E90", "CR9", "AT7"]
HEADER = ("airline,airlineId,sourceAirport,sourceAirportId,destinationAirport,"
          "destinationAirportId,codeshare,stops,equipment")


def airport_codes(n, rng):
    letters = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
    seen = set()
    codes = []
    while len(codes) < n:
        code = "".join(rng.choice(letters) for _ in range(3))
        if code not in seen:
            seen.add(code)
            codes.append(code)
    return codes


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("out")
    ap.add_argument("--rows", type=int, default=5000)
    ap.add_argument("--seed", type=int, default=2019)
    ap.add_argument("--airports", type=int, default=400)
    ap.add_argument("--nulls", action="store_true", help="sprinkle \\N markers into id columns")
    args = ap.parse_args()

    rng = random.Random(args.seed)
    codes = airport_codes(args.airports, rng)
    ids = {c: 100 + i * 7 for i, c in enumerate(codes)}
    weights = [1.0 / (rank + 1) ** 1.2 for rank in range(len(codes))]

    lines = [HEADER]
    for _ in range(args.rows):
        src, dst = rng.choices(codes, weights=weights, k=2)
        while dst == src:
            dst = rng.choices(codes, weights=weights, k=1)[0]
        airline, airline_id = rng.choice(AIRLINES)
        airline_id = str(airline_id)
        src_id, dst_id = str(ids[src]), str(ids[dst])
        if args.nulls and rng.random() < 0.1:
            src_id = "\\N"
        codeshare = "Y" if rng.random() < 0.15 else ""
        stops = "1" if rng.random() < 0.05 else "0"
        equipment = " ".join(rng.sample(EQUIPMENT, rng.randint(1, 2)))
        lines.append(",".join([airline, airline_id, src, src_id, dst, dst_id, codeshare, stops, equipment]))

    with open(args.out, "w", newline="\n") as f:
        f.write("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
