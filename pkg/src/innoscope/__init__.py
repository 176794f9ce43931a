"""innoscope: joint dimension-reduction clustering, tier labeling, membership
classification, what-if policy trials and dataset-shift screening for
regional innovation scoreboards."""

from . import classifier, dataset, jdrc, labeling, pca, shift, whatif  # noqa: F401

__version__ = "0.1.0"
