import numpy as np

from ec_lfd.scenarios import SCENARIO_NAMES, make_scenario, make_correction
from ec_lfd.segmentation import segment

for name in SCENARIO_NAMES:
    variants = [None]
    if name == "puzzle":
        variants = [{"variant": v} for v in "ABC"]
    if name == "key_lock":
        variants = [{"variant": v} for v in (1, 2)]
    for params in variants:
        world, demo = make_scenario(name, params=params, seed=0)
        truth = demo.truth
        phases = segment(demo)
        got = [(p.start, p.stop, p.contact_label) for p in phases]
        want = [p["contact"] for p in truth["phases"]]
        marks = truth["boundaries"]
        ok = len(phases) == len(want)
        labels = [p.contact_label for p in phases]
        print(f"{name} {params}: n={len(demo)} phases={len(phases)} "
              f"want={len(want)} {'OK' if ok else 'MISMATCH'}")
        print(f"  labels: {labels}")
        print(f"  want  : {want}")
        print(f"  bounds: {[p.start for p in phases[1:]]}")
        print(f"  marks : {marks}")
        if ok:
            deltas = [b - m for b, m in zip([p.start for p in phases[1:]], marks)]
            print(f"  delta : {deltas}")

for stage in (1, 2):
    frag = make_correction("key_lock", stage)
    phases = segment(frag)
    print(f"correction stage {stage}: n={len(frag)} "
          f"phases={[(p.start, p.stop, p.contact_label) for p in phases]} "
          f"marks={frag.truth['boundaries']}")
