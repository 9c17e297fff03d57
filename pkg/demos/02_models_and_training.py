"""
Models and local training
=========================

Logistic regression and the five-layer ReLU network share one flat
parameter vector layout, so the federation code never looks inside them.
"""

# %%
import numpy as np

from fedbench.data import SplitSpec, split, standardize, synthesize_blobs
from fedbench.metrics import evaluate
from fedbench.models import ModelSpec, init_params, loss_and_grad, parameter_count, predict_proba
from fedbench.numerics import Rng
from fedbench.optim import make_optimizer, train_epochs

for kind in ("logistic_regression", "sequential_dl"):
    spec = ModelSpec(kind, input_dim=100, n_classes=2)
    print(f"{kind:20s} widths {spec.widths}  params {parameter_count(spec)}")

# %%
# gradient check along a random unit direction (a long step would cross ReLU kinks)
spec = ModelSpec("sequential_dl", 10, 3)
g = np.random.default_rng(0)
params = init_params(spec, Rng(0))
x, y = g.normal(size=(8, 10)), g.integers(0, 3, 8)
_, grad = loss_and_grad(spec, params, x, y, l2=0.005)
v = g.normal(size=params.size)
v /= np.linalg.norm(v)
h = 1e-5
fd = (loss_and_grad(spec, params + h * v, x, y, 0.005)[0]
      - loss_and_grad(spec, params - h * v, x, y, 0.005)[0]) / (2 * h)
print("directional derivative", grad @ v, "finite difference", fd)

# %%
# train both kinds with their usual optimizers
ds = synthesize_blobs(2000, 20, 2, 3.0, seed=1)
train, test = split(ds, SplitSpec(seed=2))
train, (test,), _ = standardize(train, [test])
for kind, opt, l2, epochs in (("logistic_regression", "sgd", 0.001, 8),
                              ("sequential_dl", "adam", 0.005, 5)):
    spec = ModelSpec(kind, 20, 2)
    lr = 0.1 if opt == "sgd" else None
    p, hist = train_epochs(spec, init_params(spec, Rng(3)), make_optimizer(opt, lr), train,
                           epochs, 64, l2, Rng(4))
    rep = evaluate(predict_proba(spec, p, test.features), test.labels)
    print(f"{kind}: loss {hist[0]:.3f} -> {hist[-1]:.3f}, test AUC {rep.auc:.4f}")
