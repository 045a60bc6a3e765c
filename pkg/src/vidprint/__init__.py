"""vidprint: cross-platform video recognition from encrypted streaming traffic.

Pipeline: ingest or synthesize per-title traffic traces, bin downlink packet
counts into fixed-length normalized features, train a triplet-loss encoder on
a platform pair, then classify held-out titles across platforms with KNN /
N-MEV / softmax classifiers in closed- and open-set protocols.
"""

__version__ = "0.1.0"

from .core import euclidean_distance, minmax_normalize, resample_linear

__all__ = [
    "__version__",
    "euclidean_distance",
    "minmax_normalize",
    "resample_linear",
]
