"""Geometric latent-representation toolkit.

Thin python surface over the C++ core: hypersphere/von Mises-Fisher
numerics, learned Riemannian metrics, the preprocessing pipeline, and the
training/evaluation drivers.
"""

try:
    # installed layout: the extension lives inside the package
    from . import _geovae
except ImportError:
    # build-tree layout: the extension sits on PYTHONPATH
    import _geovae

sphere = _geovae.sphere
riemann = _geovae.riemann
patchkit = _geovae.patchkit
nets = _geovae.nets
harness = _geovae.harness

__all__ = ["sphere", "riemann", "patchkit", "nets", "harness"]
