"""A tour of the scaled gradient projection optimizer.

Shows the three ingredients on toy problems: projection onto the
nonnegative cone, the split-gradient diagonal scaling, and the
Barzilai-Borwein step alternation, then compares iteration counts against
plain projected gradient on a real marginal-likelihood problem.
"""

import numpy as np

import hankelid as hk
from hankelid.bayes import marglik_objective
from hankelid.sgp import SgpParams

# --- a quadratic with its optimum partly outside the cone ---------------
target = np.array([-1.0, 2.0, 3.0])


def fun_grad(lam):
    r = lam - target
    # any split with B >= 0 and V >= 0 works; here B collects the terms
    # that grow with lam and V the constant pull toward the target
    B = 2.0 * lam + 2.0 * np.maximum(-target, 0.0)
    V = 2.0 * np.maximum(target, 0.0)
    return float(r @ r), B, V


res = hk.sgp_minimize(fun_grad, np.zeros(3))
print("quadratic with target (-1, 2, 3):")
print(f"  minimizer on the cone: {np.round(res.lam, 8)}  (expected [0, 2, 3])")
print(f"  iterations: {res.n_iter}, converged: {res.converged} ({res.status})")
print(f"  objective history: {np.round(res.history, 6)}")

# --- the scaling matrix in isolation ------------------------------------
params = SgpParams()
D = hk.scaling_matrix(np.array([1.0, 1.0, 0.0]), np.array([2.0, 0.0, 1.0]), params)
print("\nscaling for lam=(1,1,0), V=(2,0,1):")
print(f"  diag(D) = {np.diag(D)}   (ratio, clipped-to-L_max, clipped-to-L_min)")

# --- SGP vs plain projected gradient on a marginal likelihood -----------
rng = np.random.default_rng(3)
run = hk.gen_scenario_run(hk.scenario_spec("S1", N=200, T=12, band_range=None), 5)
d = run.data
noise = hk.estimate_noise_variance(d, 12)
from hankelid.identify import fit_spline_hyperparams
from hankelid.model import regressor_block

phi = regressor_block(d.u, 12)
nu = fit_spline_hyperparams(d.y.T.ravel(), phi, noise, 12, d.m)
dims = hk.hankel_dims(12, d.p, d.m)
ks = hk.build_kernel_system(
    nu, 12, d.p, d.m, dims,
    hk.build_weights(d, dims), hk.SubspaceBasis.trivial(d.p * dims.r),
)
pb = hk.MarglikProblem(Y=d.y.T.ravel(), phi=phi, noise=noise, ks=ks, m=d.m)

obj, obj_grad = marglik_objective(pb)

sgp = hk.sgp_minimize(obj_grad, np.ones(3), params, fun=obj)
pg = hk.sgp_minimize(obj_grad, np.ones(3), params, fun=obj, use_scaling=False, use_bb=False)
print("\nmarginal-likelihood optimization (3 hyper-parameters):")
print(f"  SGP:  f = {sgp.fun:.4f} in {sgp.n_iter} iterations ({sgp.status})")
print(f"  PG:   f = {pg.fun:.4f} in {pg.n_iter} iterations ({pg.status})")
print("the diagonal scaling plus BB steps is what makes the difference on")
print("badly scaled problems: lambda components differ by orders of magnitude")
