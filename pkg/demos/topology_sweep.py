"""HBM bandwidth sweep on the all-to-all and mesh presets.

As HBM gets faster the mesh falls behind: preload traffic has to cross
several hops to reach the cores far from the HBM controllers.
"""
from icca import zoo
from icca.baselines import run_baseline
from icca.cost import CostModelConfig
from icca.curves import build_curves
from icca.hw import load_preset, with_hbm_bandwidth
from icca.simulator import simulate

g = zoo.gpt_like(layers=4, hidden=1024, heads=16, batch=8, context=256)
cm = CostModelConfig()
print(f"{'HBM GB/s':>9s} {'preset':>9s} {'latency us':>11s} {'link util':>9s}")
for bw in (2.5e9, 1e10, 5e10, 2e11):
    for preset in ("a2a-64", "mesh-8x8"):
        chip = with_hbm_bandwidth(load_preset(preset), bw)
        curves = build_curves(g, cm, chip)
        rep = simulate(run_baseline("full", g, curves), g, chip, cm)
        print(f"{bw / 1e9:9.1f} {preset:>9s} {rep.total_time * 1e6:11.1f} {rep.interconnect_utilization:9.1%}")
