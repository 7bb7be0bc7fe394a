"""Print the certified tail bound of each instance as a function of J.

    python scripts/tail_profile.py [--cache DIR] [instance ...]
"""

import argparse

from ergomix.modelspace import default_measure_params
from ergomix.pushforward import calibrate_truncation
from ergomix.semigroups import INSTANCES, make_instance

JS = (1, 5, 10, 20, 40, 80, 160)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("instances", nargs="*", default=sorted(INSTANCES))
    ap.add_argument("--cache", default="ergomix-out/.cache")
    args = ap.parse_args()
    print(f"{'instance':22s}" + "".join(f"{'J=' + str(j):>11s}" for j in JS) + "   N_calibrated")
    for name in args.instances:
        params, plan = calibrate_truncation(make_instance(name), default_measure_params(), J=40,
                                            cache_dir=args.cache)
        row = "".join(f"{plan.bound_for(j):11.2e}" for j in JS)
        print(f"{name:22s}{row}   {params.N_head.tolist()}")


if __name__ == "__main__":
    main()
