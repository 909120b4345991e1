"""
Speedup vs NaN density
======================

The point of skipping: once enough of the input is NaN, the NaN-aware
convolution does proportionally less arithmetic than the dense reference.
This runs the same timing grid as the `nanops speedup` CLI command at a
desk-friendly size. Block placement mimics the contiguous background
regions of imaging data; random placement scatters NaNs uniformly and
needs higher densities before whole windows cross the threshold.
"""
from nanops.bench import TrialConfig, run_speedup_trials, write_trials_csv

cfg = TrialConfig(sizes=(256,), densities=(0.0, 0.33, 0.5, 0.75, 0.9),
                  placement="block", t2_values=(0.5,), reps=5, warmup=2,
                  seed=42)
results = run_speedup_trials(cfg)

print(f"{'density':>8} {'skip%':>7} {'dense ms':>9} {'nan ms':>8} {'speedup':>8}")
for r in results:
    print(f"{r.density:8.2f} {100 * r.skip_ratio:7.1f} "
          f"{r.std_min_ns / 1e6:9.3f} {r.nan_min_ns / 1e6:8.3f} "
          f"{r.speedup:8.2f}")

write_trials_csv(results, "speedup_trials.csv",
                 meta={"seed": cfg.seed, "threads": cfg.threads})
print("\nwrote speedup_trials.csv")
print("timing columns vary run to run; everything else is seed-determined")
