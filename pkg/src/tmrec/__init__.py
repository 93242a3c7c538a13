"""Interpretable recommendation engine built on a multi-class Tsetlin Machine.

Subpackages and modules:

- `tm`: the Tsetlin Machine itself (compiled kernel with pure-Python fallback)
- `encoding`: thermometer and one-hot binarization of tabular features
- `als`: implicit-feedback alternating least squares for latent profiles
- `dataset`: transaction-log loading, feature assembly, synthetic generators
- `metrics`: ranking and classification metrics (MAP@k, accuracy)
- `baselines`: logistic regression, MLP, and popularity reference models
- `explain`: clause-level attributions and sampled Shapley values
- `bench`: scaling and backend-comparison harnesses
- `pipeline`: end-to-end prepare / train / evaluate stages
- `cli`: the `tmrec` command-line entry point
"""

from .tm import TMConfig, TsetlinMachine

__version__ = "0.1.0"

__all__ = ["TMConfig", "TsetlinMachine", "__version__"]
