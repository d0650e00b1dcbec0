"""
Search baselines
================

Random single-edge toggling and a small evolutionary algorithm, timed on
the same configurations.
"""
import numpy as np

from graphpcg import EAParams, ea_generate, is_valid, load_constraint_set, random_search
from graphpcg.environment import sample_configuration

for name in ("set2", "set5"):
    cs = load_constraint_set(name)
    for size in (5, 6, 7):
        rng = np.random.default_rng(size)
        rs, ea = [], []
        for _ in range(20):
            cfg = sample_configuration(cs, size, rng, size=size)
            g, stats = random_search(cs, cfg, seed=rng)
            assert is_valid(cs, g)
            rs.append(stats.duration_ms)
            g, stats = ea_generate(cs, cfg, params=EAParams(seed=rng))
            assert is_valid(cs, g)
            ea.append(stats.duration_ms)
        print(f"{name} size {size}: random search {np.median(rs):8.2f} ms   EA {np.median(ea):8.2f} ms")
