"""Inverse halftoning as patch regression.

Images are halftoned by error diffusion. A regression head maps each binary
10x10 patch to its grayscale original; overlapping predictions are averaged
back into an image.
"""

import numpy as np
from skimage import color, data

from taskdict import TaskSpec, TrainConfig, fit
from taskdict.data import PatchConfig, extract_patches, floyd_steinberg, halftone_pairs
from taskdict.data import reconstruct_image
from taskdict.metrics import predict_all, psnr
from taskdict.pgm import write_pgm

train_imgs = [getattr(data, n)() / 255.0 for n in ("camera", "coins", "clock", "moon")]
test = color.rgb2gray(data.astronaut())[100:228, 150:278]

X, Y = halftone_pairs(train_imgs, PatchConfig(10, 1), n=100000, rng=0)
scale = 0.1  # binary patches of 100 pixels have norms near 10
task = TaskSpec("regression", m=100, p=100, q=100)
cfg = TrainConfig(lambda1=0.15, lambda2=0.01, nu=1e-6, rho=1.0, T=500, eta=200, init_passes=1)
model = fit(task, scale * X, Y, cfg)

ht = floyd_steinberg(test)
Xt, pos = extract_patches(ht, PatchConfig(10, 1, zero_mean=False, unit_norm=False))
est, _ = predict_all(model, scale * Xt)
rec = np.clip(reconstruct_image(est, pos, test.shape), 0, 1)
print(f"halftone PSNR      {psnr(ht, test, peak=1.0):.2f} dB")
print(f"reconstructed PSNR {psnr(rec, test, peak=1.0):.2f} dB")
write_pgm("halftone.pgm", ht)
write_pgm("reconstructed.pgm", rec)
print("wrote halftone.pgm and reconstructed.pgm")
