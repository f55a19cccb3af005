# %% [markdown]
# # Fluxes and Riemann problems
#
# The macroscopic flux is the expected current across one bond under the
# product invariant measure. For the stick process it is `(p - q) rho (1 + rho)`.
# For the two-species thermal bath it depends on one parameter `c` and can have
# two inflexion points. Riemann solutions come from the convex or concave
# envelope of the flux between the two states.

# %%
import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from ipscoupling.hydro import (
    RiemannProblem,
    flux_exact_from_measure,
    godunov,
    inflexion_report,
    riemann_solve,
    s2ep_flux_model,
    stp_flux,
    stp_flux_model,
    sup_distance_away_from_jumps,
)
from ipscoupling.rates import build_stp, build_thermal_bath, thermal_b_for_c

# %% [markdown]
# ## Closed forms against the measure expectation

# %%
stick = build_stp(1.0, 0.0)
for rho in (0.5, 1.0, 2.0):
    print(f"rho={rho}: closed {float(stp_flux(rho, 1, 0)):.6f}  measure {flux_exact_from_measure(stick, rho):.6f}")


def bath(c, a=0.5):
    return build_thermal_bath(a, thermal_b_for_c(a, c))


for c in (0.145, 0.5, 0.9):
    rep = inflexion_report(s2ep_flux_model(bath(c)))
    print(f"c={c}: {rep.count} inflexion point(s) at {np.round(rep.locations, 4)}")

# %% [markdown]
# ## Two shocks around a fan
#
# With `c = 0.145` and the symmetric data `0.303 -> -0.303` the upper concave
# envelope touches the flux only between the two inflexion points. The
# solution is a left-moving shock, a fan and a right-moving shock.

# %%
flux = s2ep_flux_model(bath(0.145))
sol = riemann_solve(RiemannProblem(0.303, -0.303, flux))
for w in sol.waves:
    print(f"{w.kind:12s} {w.left:+.4f} -> {w.right:+.4f}  speeds {w.speed:+.4f} .. {w.speed_right:+.4f}")

x, u = godunov(flux, 0.303, -0.303)
print("finite-volume gap away from shocks:", round(sup_distance_away_from_jumps(sol, x, u), 4))

fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(10, 3.5))
r = np.linspace(-1, 1, 801)
ax0.plot(r, flux.value(r))
ax0.set_xlabel("rho")
ax0.set_ylabel("flux")
ax1.plot(x, u, lw=1, label="finite volumes")
ax1.plot(x, sol.profile(x, 1.0), "--", label="envelope")
ax1.set_xlabel("x / t")
ax1.legend()
fig.tight_layout()
fig.savefig("two_shocks.svg", metadata={"Date": None})

# %% [markdown]
# ## Stick-process shock
#
# The convex flux turns `2 -> 0` into a single shock whose speed is the chord
# slope `(flux(2) - flux(0)) / 2 = 3`.

# %%
shock = riemann_solve(RiemannProblem(2.0, 0.0, stp_flux_model(1.0, 0.0)))
print(shock.waves)
