"""Sparse coding with the elastic net.

Solves one problem with the homotopy solver, checks the optimality
conditions, and compares against plain coordinate descent. Then shows how
the support shrinks as lambda1 grows.
"""

import numpy as np

from taskdict.elastic_net import ElasticNetParams, check_kkt, objective, solve, solve_cd

rng = np.random.default_rng(0)
m, p = 10, 20
D = rng.standard_normal((m, p))
D /= np.linalg.norm(D, axis=0)
x = rng.standard_normal(m)

params = ElasticNetParams(lambda1=0.15, lambda2=0.01)
code = solve(x, D, params)
print("active atoms:", code.active.tolist())
print("signs:       ", code.signs.tolist())
print("objective:    %.10f" % objective(x, D, code.alpha, 0.15, 0.01))

report = check_kkt(x, D, code.alpha, params, tol=1e-8)
print("KKT equality violation   %.2e" % report.equality)
print("KKT inequality violation %.2e" % report.inequality)

ref = solve_cd(x, D, 0.15, 0.01)
print("max difference to coordinate descent: %.2e" % np.max(np.abs(ref - code.alpha)))

# the stored Cholesky factor reproduces the regularized Gram of the active set
DA = D[:, code.active]
gram = DA.T @ DA + 0.01 * np.eye(len(code.active))
print("factor residual: %.2e" % np.max(np.abs(code.chol @ code.chol.T - gram)))

print("\nlambda1   nonzeros")
for lam in (0.01, 0.05, 0.15, 0.5, 1.0, 3.0):
    a = solve(x, D, ElasticNetParams(lam, 0.01)).alpha
    print(f"{lam:7.2f}   {np.count_nonzero(a):3d}")
