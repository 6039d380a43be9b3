"""Semi-supervised training with a continuation on mu.

Only 10% of the training signals carry labels. The dictionary update mixes
the reconstruction gradient on unlabeled signals (weight mu) with the task
gradient on labeled ones (weight 1 - mu). Starting at mu = 1, each stage
lowers mu by 0.1 and continues from the previous stage.
"""

import numpy as np

from taskdict import SampleStream, TaskSpec, TrainConfig, TrainedModel
from taskdict.metrics import error_rate, predict_all
from taskdict.synthetic import planted_two_class
from taskdict.trainer import continuation_schedule, init_unsupervised, warm_start_w

seed = 0
Xtr, ytr = planted_two_class(2000, seed)
Xte, yte = planted_two_class(500, seed + 100)
XL, yL, XU = Xtr[:, :200], ytr[:200], Xtr[:, 200:]

p = 50
cfg = TrainConfig(lambda1=0.15, lambda2=0.01, nu=1e-4, rho=0.3, T=40, eta=100, seed=seed)
task = TaskSpec("binary_linear", m=Xtr.shape[0], p=p)
D0 = init_unsupervised(SampleStream(Xtr, seed=seed), p, 0.15, 0.01, passes=5)
start = TrainedModel(task, D0, np.zeros(p), cfg.elastic_net)
start.w = warm_start_w(start, XL, yL, cfg.nu)

mus = [round(1.0 - 0.1 * k, 1) for k in range(11)]
stages = continuation_schedule(
    start, SampleStream(XL, yL, seed=1), SampleStream(XU, seed=2), cfg, mus
)
print(" mu   test error")
for mu, model in zip(mus, stages):
    print(f"{mu:.1f}   {error_rate(predict_all(model, Xte)[0], yte):.3f}")
