"""Regenerates latency_oracle.json: random link and split draws with every
latency component recomputed at 50 significant digits."""

import json
import random

from mpmath import mp, mpf, log, pi, sqrt

mp.dps = 50
rng = random.Random(20240611)


def u(lo, hi):
    return rng.uniform(lo, hi)


def logu(lo, hi):
    return 10 ** rng.uniform(lo, hi)


cases = []
for i in range(1000):
    sx, sy = u(-2000, 2000), u(-2000, 2000)
    if i % 20 == 0:
        vx, vy = sx + u(-0.5, 0.5), sy + u(0.1, 0.6)
    else:
        vx, vy = u(-2000, 2000), u(-2000, 2000)
    c = dict(
        serving_xy=[sx, sy],
        vehicle_xy=[vx, vy],
        gain=u(0.5, 2.0),
        light_speed=3.0e8,
        carrier_freq=logu(9, 10),
        noise_power=logu(-14, -11),
        downlink_bandwidth=logu(6, 8),
        transmit_power=u(0.05, 1.0),
        serving_compute=logu(10, 11.3),
        serving_workload=0.0 if i % 7 == 0 else logu(8, 11.5),
        premig_compute=logu(10, 11.3),
        premig_workload=0.0 if i % 5 == 0 else logu(8, 11.5),
        inter_node_bandwidth=logu(8, 10),
        task_size=logu(6, 9),
        result_size=logu(5, 8),
        alpha=0.0 if i % 10 == 0 else u(0.0, 0.99),
        cycles_per_bit=logu(1, 3),
        uplink=u(0.0, 0.1),
    )
    premig_bits = c["alpha"] * c["task_size"]  # rounded exactly as the simulator does
    d = sqrt((mpf(vx) - mpf(sx)) ** 2 + (mpf(vy) - mpf(sy)) ** 2)
    d = max(d, mpf(1))
    h = mpf(c["gain"]) * (mpf(c["light_speed"]) / (4 * pi * mpf(c["carrier_freq"]) * d)) ** 2
    rate = mpf(c["downlink_bandwidth"]) * log(1 + mpf(c["transmit_power"]) * h / mpf(c["noise_power"]), 2)
    local_bits = mpf(c["task_size"]) - mpf(premig_bits)
    f = mpf(c["cycles_per_bit"])
    tpe = (mpf(c["serving_workload"]) + local_bits * f) / mpf(c["serving_compute"])
    tpem = (mpf(c["premig_workload"]) + mpf(premig_bits) * f) / mpf(c["premig_compute"])
    tm = mpf(premig_bits) / mpf(c["inter_node_bandwidth"])
    proc = max(tpe, tpem + tm)
    td = mpf(c["result_size"]) / rate
    total = mpf(c["uplink"]) + proc + td
    c["expected"] = {
        k: float(v)
        for k, v in dict(
            gain=h, rate=rate, proc_serving=tpe, proc_premig=tpem, migrate=tm,
            proc_total=proc, downlink=td, total=total,
        ).items()
    }
    cases.append(c)

with open("latency_oracle.json", "w") as fh:
    fh.write("[\n" + ",\n".join(json.dumps(c) for c in cases) + "\n]\n")
