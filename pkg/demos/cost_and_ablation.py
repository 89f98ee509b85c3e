"""Compare parameter and FLOP budgets of the attention modules.

Prints the per-module cost of the default model, the effect of switching
each module off, and how the channel-grouping factor shrinks the
multi-scale attention block. Run with ``python demos/cost_and_ablation.py``.
"""

from latte import ModelConfig, profile_model
from latte.emsa import emsa_param_count
from latte.profiler import MODULES

base = ModelConfig()
prof = profile_model(base, T=50)
print(f"default model: {prof.total_params} params, {prof.total_flops} FLOPs per frame, "
      f"{prof.per_video_flops} FLOPs per 50-frame video")
for m in MODULES:
    print(f"  {m:5s} params {prof.module_params(m):7d}  flops/frame {prof.module_flops(m):10d}")

print("\nablations")
for name, switches in [("no EMSA", (False, True, True)), ("no MAA", (True, False, True)),
                       ("no AAA", (True, True, False))]:
    off = profile_model(base.with_switches(*switches), T=50)
    print(f"  {name:8s} params {off.total_params:7d} ({off.total_params - prof.total_params:+d})")

print("\nEMSA parameters by group count (C = 160)")
for G in (1, 2, 4, 8, 16):
    print(f"  G={G:2d}: {emsa_param_count(160, G)}")
