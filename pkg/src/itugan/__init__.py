"""GANs with an inverse transformation unit between generator and discriminator."""

__version__ = "0.1.0"
