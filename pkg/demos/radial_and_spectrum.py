# %% [markdown]
# Radial nodal solutions on the annulus 1 < |x| < 2 and the spectrum of
# their linearization. Run as a script or cell by cell.

# %%
import numpy as np

from laneemden.harmonics import lb_eigenvalue
from laneemden.radial import Annulus, energy, nodal_zones, solve_radial
from laneemden.spectrum import J_exponent, morse_index, morse_index_sym, sl_spectrum

ann = Annulus(1.0, 2.0, 2)

# %%
# one, two and three nodal zones at p = 3
for m in (1, 2, 3):
    prof = solve_radial(ann, 3.0, m)
    print(f"m={m}: zones {nodal_zones(prof)}, max|u| {prof.sup_norm:.4f}, "
          f"u'(a) {prof.slope:.4f}, energy {energy(prof):.4f}")

# %%
# negative eigenvalues of the radial problem and the resulting Morse index
prof = solve_radial(ann, 3.0, 2)
spec = sl_spectrum(prof, q=4)
print("nu:", np.round(spec.eigenvalues, 4))
print("J:", [round(J_exponent(v, 2), 4) for v in spec.eigenvalues[: spec.n_negative]])
print("Morse index:", morse_index(spec))
for n in (1, 2, 4):
    print(f"  restricted to X^{n}:", morse_index_sym(spec, n=n))

# %%
# nu_1 against -lambda_n: the first crossings are the bifurcation candidates
for p in (1.05, 1.2, 1.5, 2.0, 3.0):
    nu1 = sl_spectrum(solve_radial(ann, p, 1), q=1).eigenvalues[0]
    below = [n for n in range(1, 8) if nu1 + lb_eigenvalue(n, 2) < 0]
    print(f"p={p}: nu_1 = {nu1:9.4f}, modes with nu_1 + n^2 < 0: {below}")
