"""Hand-written reference GAN loop without any transformation unit.

Shares only the network classes and tensor ops with the library; the
minibatch/latent draws, the two objectives and Adam are written out here
from their textbook definitions.
"""
import numpy as np

from itugan.grad import Tensor, clamp, log, mean
from itugan.gan.nets import build_nets


def vanilla_losses(images, steps, *, seed=0, arch="mlp", latent_dim=8, hidden=16, batch=16,
                   lr=2e-4, beta1=0.5, beta2=0.999, adam_eps=1e-8, eps=1e-7):
    """[(d_loss, g_loss)] for ``steps`` alternating updates plus the final parameter arrays."""
    init, data_ss, noise_ss = np.random.SeedSequence(seed).spawn(3)
    G, D = build_nets(arch, latent_dim, hidden, images.shape[2:], np.random.default_rng(init))
    rng_data = np.random.default_rng(data_ss)
    rng_noise = np.random.default_rng(noise_ss)
    adam = {id(p): [np.zeros_like(p.data), np.zeros_like(p.data)] for p in G.parameters() + D.parameters()}
    t = {"G": 0, "D": 0}

    def update(tag, params):
        t[tag] += 1
        for p in params:
            m, v = adam[id(p)]
            g = p.grad
            m[...] = beta1 * m + (1.0 - beta1) * g
            v[...] = beta2 * v + (1.0 - beta2) * (g * g)
            m_hat = m / (1.0 - beta1 ** t[tag])
            v_hat = v / (1.0 - beta2 ** t[tag])
            p.data -= lr * m_hat / (np.sqrt(v_hat) + adam_eps)

    out = []
    n = images.shape[0]
    for _ in range(steps):
        x = Tensor(images[rng_data.choice(n, size=batch, replace=batch > n)])
        z = rng_noise.standard_normal((batch, latent_dim))
        fake = Tensor(G(Tensor(z)).data)  # detached sample
        for p in D.parameters():
            p.zero_grad()
        ld = -(mean(log(clamp(D(x), eps, 1 - eps))) + mean(log(1.0 - clamp(D(fake), eps, 1 - eps))))
        ld.backward()
        update("D", D.parameters())

        z = rng_noise.standard_normal((batch, latent_dim))
        for p in G.parameters() + D.parameters():
            p.zero_grad()
        lg = -mean(log(clamp(D(G(Tensor(z))), eps, 1 - eps)))
        lg.backward()
        update("G", G.parameters())
        out.append((float(ld.item()), float(lg.item())))
    return out, G.state_dict()
