"""Compressed sensing: learning the sensing matrix with the dictionary.

Signals are 8x8 patches, measured through r = 10 linear projections and
decoded as x ~ W alpha(Z x, D). We compare a random projection with an
overcomplete DCT dictionary, random or PCA projections with unsupervised
dictionaries, and joint training of Z, D and W from the random start.

Usage: python 04_compressed_sensing.py [train.pgm ...]
Without arguments the scikit-image sample images are used.
"""

import sys

import numpy as np

from taskdict import SampleStream, TaskSpec, TrainConfig, TrainedModel, make_baseline_z
from taskdict import overcomplete_dct
from taskdict.data import PatchConfig, extract_patches
from taskdict.metrics import mse, predict_all
from taskdict.pgm import read_pgm
from taskdict.trainer import init_unsupervised, project_dictionary, train, warm_start_w


def sample_images():
    from skimage import color, data

    gray = lambda im: color.rgb2gray(im) if im.ndim == 3 else im / 255.0
    train = [gray(getattr(data, n)()) for n in ("camera", "coins", "clock", "moon")]
    test = [gray(getattr(data, n)()) for n in ("astronaut", "chelsea")]
    return train, test


if len(sys.argv) > 1:
    imgs = [read_pgm(p) for p in sys.argv[1:]]
    train_imgs, test_imgs = imgs[:-1], imgs[-1:]
else:
    train_imgs, test_imgs = sample_images()


def pool(images):
    P = np.concatenate([extract_patches(im, PatchConfig(8, 1))[0] for im in images], axis=1)
    return P[:, np.linalg.norm(P, axis=0) > 0]


rng = np.random.default_rng(0)
tr, te = pool(train_imgs), pool(test_imgs)
Xtr = tr[:, rng.choice(tr.shape[1], min(50000, tr.shape[1]), replace=False)]
Xte = te[:, rng.choice(te.shape[1], min(10000, te.shape[1]), replace=False)]
m, p, r = 64, 100, 10
task = TaskSpec("compressed_sensing", m=m, p=p, r=r)
cfg = TrainConfig(lambda1=0.15, lambda2=0.01, nu=1e-9, rho=1.0, T=500, eta=200)


def decoder(Z, D):
    model = TrainedModel(task, D, np.zeros((m, p)), cfg.elastic_net, z=Z)
    model.w = warm_start_w(model, Xtr[:, :10000], None, 1e-6)
    return model


def unsupervised(Z):
    return init_unsupervised(SampleStream(Z @ Xtr[:, :20000]), p, 0.15, 0.01, passes=2)


Zr = make_baseline_z("random_gaussian", r, m, rng=0)
Zp = make_baseline_z("pca", r, m, data=Xtr)
models = {
    "RANDOM + DCT": decoder(Zr, project_dictionary(Zr @ overcomplete_dct(8, p))),
    "RANDOM + UL": decoder(Zr, unsupervised(Zr)),
    "PCA + UL": decoder(Zp, unsupervised(Zp)),
}
print("training Z, D and W jointly ...")
models["SL1 (joint)"] = train(models["RANDOM + UL"], SampleStream(Xtr), cfg)
print("\nmethod          test MSE per pixel x100")
for name, model in models.items():
    print(f"{name:15s} {100 * mse(predict_all(model, Xte)[0], Xte):.3f}")
