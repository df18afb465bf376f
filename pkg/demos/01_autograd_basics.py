"""A tour of the tape-based autodiff engine.

Builds a tiny computation by hand, runs backward, and confirms one
gradient against a central finite difference.
"""
import numpy as np

from braintap import autograd as ag

rng = np.random.default_rng(0)

# Tensors are 2-D float64; a scalar is a 1x1 matrix.
w = ag.Tensor(rng.normal(size=(3, 2)), requires_grad=True)
x = ag.Tensor(rng.normal(size=(4, 3)))


def loss_value():
    p = ag.row_softmax(ag.relu(ag.matmul(x, w)), temperature=0.5)
    return ag.sum_all(ag.hadamard(p, p))


loss = loss_value()
loss.backward()
print("loss:", loss.item())
print("dloss/dw:\n", w.grad)

# Spot-check one entry with central differences.
eps = 1e-6
orig = w.data[1, 0]
w.data[1, 0] = orig + eps
up = loss_value().item()
w.data[1, 0] = orig - eps
dn = loss_value().item()
w.data[1, 0] = orig
fd = (up - dn) / (2 * eps)
print("analytic %.8f vs finite-difference %.8f" % (w.grad[1, 0], fd))

# Inference runs without building a tape.
with ag.no_grad():
    y = loss_value()
print("no_grad result has no parents:", y._parents == ())
