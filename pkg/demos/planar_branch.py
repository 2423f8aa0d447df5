# %% [markdown]
# Locate the second bifurcation point of the one-zone radial family in the
# plane and follow the nonradial branch that leaves it. About a minute.

# %%
import numpy as np

from laneemden.bifurcation import find_bifurcation, parity_report
from laneemden.continuation import BranchConfig, continue_branch
from laneemden.radial import Annulus

ann = Annulus(1.0, 2.0, 2)

# %%
pt = find_bifurcation(ann, 1, 2)
print(f"p_2 = {pt.pn:.8f}, bracket {pt.bracket}, cone index {pt.cone_jump[0]} -> {pt.cone_jump[1]}")
print(parity_report(pt))

# %%
br = continue_branch(pt, BranchConfig(p_max=2.0))
print(f"{len(br.states)} states, termination {br.termination.value}")
print(f"amplitude ~ |p - p_2|^{br.amplitude_exponent():.3f}")

# %%
for s in br.states[:: max(1, len(br.states) // 8)]:
    print(f"p {s.p:.5f}  amplitude {s.mode_amplitude:.3e}  residual {s.residual_norm:.1e}  "
          f"L {s.disc.L}  in cone {s.in_cone}")
print("arclength monotone:", bool(np.all(np.diff(br.arclength) > 0)))
