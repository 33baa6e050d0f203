"""Schedule a small GPT-style decode step with every scheduler and simulate each plan."""
from icca import zoo
from icca.baselines import ideal_roofline, run_baseline
from icca.cost import CostModelConfig
from icca.curves import build_curves
from icca.hw import load_preset
from icca.simulator import simulate

g = zoo.gpt_like(layers=4, hidden=1024, heads=16, batch=8, context=256)
chip = load_preset("ipu-mk2-a2a")
cm = CostModelConfig()
curves = build_curves(g, cm, chip)

print(f"{g.name}: {g.num_operators} operators on {chip.num_cores} cores")
print(f"{'ideal':8s} {ideal_roofline(curves, chip.hbm.total_bandwidth) * 1e6:10.2f} us (analytic bound)")
for kind in ("full", "dynamic", "static", "naive"):
    plan = run_baseline(kind, g, curves)
    rep = simulate(plan, g, chip, cm)
    print(f"{kind:8s} {rep.total_time * 1e6:10.2f} us simulated, {plan.t_end * 1e6:10.2f} us analytic, "
          f"HBM busy {rep.hbm_utilization:.0%}")
