"""Parameter scan helper: evaluate candidate small-preset geometries.

Runs a coarse grid over road layout and MAD and prints the three metrics
per protocol and speed class, to pick defaults where the expected
qualitative orderings hold with margin. Not part of the test suite.
"""

import argparse
import sys
import time

from vanetsim.config import preset
from vanetsim.harness import metric_values, run_experiment, summarize, SPEED_CLASS_MIXES


def evaluate(cfg, protocols, classes, reps):
    out = {}
    for proto in protocols:
        for cls in classes:
            c = cfg.with_overrides(
                protocol=proto, class_mix=SPEED_CLASS_MIXES[cls], repetitions=reps
            )
            reports = run_experiment(c)
            out[(proto, cls)] = {
                "reach": summarize(metric_values(reports, "reachability")),
                "ete": summarize(metric_values(reports, "average_ete_s")),
                "traffic": summarize(metric_values(reports, "total_traffic_received")),
            }
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--reps", type=int, default=6)
    ap.add_argument("--classes", default="slow,fast")
    ap.add_argument("--protocols", default="acr,aodv,dsdv")
    ap.add_argument("--grid", default="1x0:40,1x0:60,1x1:40,1x1:60,2x1:40,2x2:40,1x1:100")
    ap.add_argument("--relay-hold", type=float, default=0.01)
    args = ap.parse_args()

    classes = args.classes.split(",")
    protocols = args.protocols.split(",")
    for spec_str in args.grid.split(","):
        roads, mad = spec_str.split(":")
        h, v = (int(x) for x in roads.split("x"))
        cfg = preset("small").with_overrides(
            horizontal_roads=h, vertical_roads=v, mad_m=float(mad),
            relay_hold_s=args.relay_hold,
        )
        t0 = time.time()
        res = evaluate(cfg, protocols, classes, args.reps)
        print(f"== roads {h}x{v} mad {mad} relay_hold {args.relay_hold} "
              f"({time.time()-t0:.0f}s)")
        for proto in protocols:
            parts = []
            for cls in classes:
                r = res[(proto, cls)]
                reach = f"{r['reach'].mean:.3f}" if r["reach"] else "--"
                ete = f"{r['ete'].mean:.3f}" if r["ete"] else "--"
                traf = f"{r['traffic'].mean:.0f}" if r["traffic"] else "--"
                parts.append(f"{cls}: R={reach} E={ete} T={traf}")
            print(f"  {proto:4s} " + " | ".join(parts))
        sys.stdout.flush()


if __name__ == "__main__":
    main()
