"""Central finite-difference oracle shared by gradient tests."""
import numpy as np

from itugan.grad import Tensor


def numeric_grads(fn, arrays, step=1e-5):
    """d fn(*arrays) / d array for each array, by central differences.

    ``fn`` takes plain float64 arrays and returns a float.
    """
    out = []
    for k, a in enumerate(arrays):
        g = np.zeros_like(a)
        flat = a.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            fp = fn(*arrays)
            flat[i] = orig - step
            fm = fn(*arrays)
            flat[i] = orig
            gflat[i] = (fp - fm) / (2 * step)
        out.append(g)
    return out


def autodiff_grads(build, arrays):
    leaves = [Tensor(a, requires_grad=True) for a in arrays]
    loss = build(*leaves)
    loss.backward()
    return [t.grad for t in leaves]


def rel_error(a, b):
    return float(np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(a)), np.max(np.abs(b))))


def check(build, arrays, tol=1e-4):
    """Max relative error between autodiff and finite-difference gradients."""
    auto = autodiff_grads(build, [a.copy() for a in arrays])
    num = numeric_grads(lambda *xs: build(*[Tensor(x) for x in xs]).item(), [a.copy() for a in arrays])
    return max(rel_error(a, n) for a, n in zip(auto, num))
