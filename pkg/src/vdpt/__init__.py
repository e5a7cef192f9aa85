"""vdpt: desk-scale ICU mortality prediction with uncertainty and explanations.

Subpackages and modules:

- numeric: linear algebra, RNG, correlation, KDE primitives
- data: cohorts, CSV I/O, synthetic generator, imputation, feature selection
- mlp: deterministic feed-forward net with weighted BCE and Nesterov SGD
- vdp: variational density propagation net (analytic mean/covariance)
- uncertainty: empirical variance CDF and the 1 - CDF(sigma^2) confidence
- influence: influence-function explanations and their validation
- drift: KS / chi-square dataset-shift battery
- evaluation: metrics, stratified CV, seeded random hyperparameter search
- service: HTTP API, record store, CLI
"""

__version__ = "0.1.0"
