# %% [markdown]
# # Increasing couplings on a single bond
#
# A coupled jump moves `k` particles in the lower configuration and `l` in the
# upper one across the same bond. For a fixed quadruple of site values the
# nonzero coupled rates lie on a monotone lattice path in the `(k, l)` plane.
# This script builds that path for a stick process and a two-species model,
# then runs the global checks: attractiveness, exchanges of discrepancies and
# the irreducibility conditions.

# %%
import numpy as np

from ipscoupling.coupling import (
    audit_discrepancies,
    check_attractive,
    coupling_table,
    detect_exchanges,
    equivalence_report,
    staircase,
)
from ipscoupling.irreducibility import check_IC
from ipscoupling.rates import build_s2ep, build_stp, build_zrp
from ipscoupling.s2ep_table import random_attractive_rates

# %% [markdown]
# ## Stick process
#
# From a pile of 3 facing an empty site, any number of particles up to 3 may
# jump. Coupled with a pile of 1, the path steps through `(1,0), (2,0), (3,0)`
# and then climbs to `(3,1)`.

# %%
stick = build_stp(1.0, 0.0)
ct = coupling_table(stick, (3, 0, 1, 0), (1,))
print("entries:", ct.entries)
path = staircase(stick, (3, 0, 1, 0), (1,))
print("path:", path.points)
print("rates along the path:", path.rates)

# %% [markdown]
# The closed form, the staircase and the backward recursion agree on every
# quadruple with values up to 10.

# %%
rep = equivalence_report(stick, w=10)
print(f"{rep.quads} quadruples, worst gap {rep.worst:.2g}, off-path entries {rep.off_path}")

# %% [markdown]
# ## Attractiveness
#
# A zero-range process whose departure rate drops from 2 to 1 is not
# attractive, and the scan returns the first violating quadruple.

# %%
print(check_attractive(build_zrp({1: 1.0}, [0, 1, 2, 3])))
print(check_attractive(build_zrp({1: 1.0}, [0, 2, 1])))

# %% [markdown]
# ## Two species and exchanges of discrepancies
#
# A random attractive two-species table has an exchange exactly when a double
# jump out of `(1, -1)` is faster than pair creation at `(0, 0)`.

# %%
rng = np.random.default_rng(7)
for _ in range(5):
    r = random_attractive_rates(rng)
    t = build_s2ep(r)
    wit = detect_exchanges(t)
    faster = r["r2_p"] > r["r00_p"] or r["r2_m"] > r["r00_m"]
    print(f"double jump faster: {faster!s:5}  witness: {None if wit is None else (wit.quad, wit.k, wit.l)}")

# %%
audit = audit_discrepancies(t)
print(f"{audit.entries} nonzero coupled moves, {audit.positive_delta} increase the discrepancy count")

# %% [markdown]
# ## Irreducibility conditions
#
# For the stick process opposite discrepancies can always be brought together
# and destroyed. A zero-range process with a zero rate at height 2 blocks some
# pairs, and the check reports one of them.

# %%
print(check_IC(build_stp(0.7, 0.3), w=5).summary())
res = check_IC(build_zrp({1: 0.6, -1: 0.4}, [0, 1, 0, 1]), w=5)
print(res.summary(), "witness:", res.witness)
