"""Spectral laboratory for small-data Schrodinger maps.

Building blocks: dyadic partitions and direction sets (`partition`),
periodic space-time fields and transforms (`grid`), the norm evaluators of
the resolution spaces (`norms`), the stereographic gauge and nonlinearity
(`gauge`), free/Duhamel evolution with a Picard solver and split-step
oracle (`evolution`), frequency-localized random atoms (`atoms`), and the
inequality probe harness (`estimates`).
"""

__version__ = "0.1.0"
