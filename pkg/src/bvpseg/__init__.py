"""Blood-volume-pulse feature extraction under controlled noise.

Synthetic BVP generation, incremental noise corruption, Butterworth
filtering, skewness-gated segmentation, feature extraction and the paired
statistics used to compare extraction methods.
"""

__version__ = "0.1.0"
