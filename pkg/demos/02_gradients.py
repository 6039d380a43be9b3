"""Gradients of the task-driven objective, checked by finite differences.

For one sample of a compressed-sensing model we compare the analytic
gradients with respect to W, D and Z against central differences along a
random direction. The active set must not change inside the stencil, which
holds here for a small enough step.
"""

import numpy as np

from taskdict.elastic_net import ElasticNetParams, solve
from taskdict.gradients import grad_sample
from taskdict.model import TrainedModel
from taskdict.tasks import TaskSpec

rng = np.random.default_rng(3)
m, p, r = 12, 16, 6
task = TaskSpec("compressed_sensing", m=m, p=p, r=r)
D = rng.standard_normal((r, p))
D /= np.linalg.norm(D, axis=0)
Z = rng.standard_normal((r, m)) / np.sqrt(m)
W = rng.standard_normal((m, p))
model = TrainedModel(task, D, W, ElasticNetParams(0.05, 0.01), z=Z)
x = rng.standard_normal(m)


def loss(D, W, Z):
    a = solve(Z @ x, D, model.params).alpha
    return 0.5 * np.sum((x - W @ a) ** 2)


g = grad_sample(None, x, model)
print("active set size:", len(solve(Z @ x, D, model.params).active))
h = 1e-6
for name, grad in (("W", g.grad_w), ("D", g.grad_d), ("Z", g.grad_z)):
    E = rng.standard_normal(grad.shape)
    E /= np.linalg.norm(E)
    args = {"D": D, "W": W, "Z": Z}
    plus = dict(args, **{name: args[name] + h * E})
    minus = dict(args, **{name: args[name] - h * E})
    fd = (loss(**plus) - loss(**minus)) / (2 * h)
    an = float(np.sum(grad * E))
    print(f"{name}: finite difference {fd: .8f}  analytic {an: .8f}  rel. error {abs(fd - an) / abs(an):.1e}")
