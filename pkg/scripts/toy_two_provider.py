#!/usr/bin/env python3
"""Two-provider toy: how a fixed floor bites harder when traffic drops.

Provider 1 must earn at least 4 of the interval's exposures (K=5 per list).
With 3 users there are 15 slots and the floor leaves 73.3% of the exposure
region feasible; with 2 users only 10 slots remain (60.0%) and accuracy has
to give way further.
"""

import numpy as np

from bankfair.acceptance import toy_exposure_run
from bankfair.metrics import feasible_region_ratio

PLAN = np.array([4.0, 0.0])
K = 5


def main():
    for users in (3, 2):
        ratio = feasible_region_ratio(PLAN, users, K)
        exposure, ndcg = toy_exposure_run(users)
        print(f"{users} users: feasible region {ratio:.1%}, "
              f"provider-1 exposure {int(exposure[0])} (floor 4), "
              f"mean accuracy {ndcg:.4f}")


if __name__ == "__main__":
    main()
