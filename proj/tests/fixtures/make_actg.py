"""Writes actg_like.csv: a synthetic randomized trial shaped like an HIV study
(Karnofsky score, CD4 count, age, two arms, follow-up in days, heavy censoring)."""

import csv
import math
import random
from pathlib import Path

rng = random.Random(175)
rows = []
for i in range(400):
    karnof = rng.choice([70, 80, 90, 90, 100, 100])
    cd40 = round(max(20.0, rng.gauss(350, 110)))
    age = round(min(70.0, max(18.0, rng.gauss(35, 8))))
    trt = int(rng.random() < 0.5)
    z = (karnof - 90) / 10 + (cd40 - 350) / 110
    lp = -0.45 * z + trt * (-0.3 - 0.5 * (cd40 - 350) / 110 + 0.02 * (age - 35))
    t = -math.log(rng.random()) / (0.00025 * math.exp(lp))
    c = rng.uniform(300, 1200)
    time = max(1, round(min(t, c)))
    rows.append({"Karnof": karnof, "CD40": cd40, "Age": age, "trt": trt,
                 "time": time, "event": int(t <= c)})

out = Path(__file__).with_name("actg_like.csv")
with out.open("w", newline="") as f:
    w = csv.DictWriter(f, fieldnames=list(rows[0]))
    w.writeheader()
    w.writerows(rows)
print(out, sum(r["event"] for r in rows), "events")
