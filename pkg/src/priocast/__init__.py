"""priocast: saliency-prioritized progressive image offloading.

A codec that encodes an image into a priority-ordered packet stream
(most recognition-relevant data first), a discrete-event simulator for
duty-cycled lossy links, receiver-side reconstruction from any delivered
subset, and Bjontegaard-delta utilities for comparing rate-quality
curves.
"""

from .bd import RatePoint, RQCurve, bd_quality, bd_rate
from .codec import (
    CodecConfig,
    EntropyMode,
    OffloadBitstream,
    Packet,
    QuantParams,
    StreamHeader,
    dequantize_levels,
    deserialize,
    deserialize_partial,
    quantize_latent,
    serialize,
)
from .convnet import (
    Activation,
    BuiltinTransform,
    ConvNetSpec,
    Image,
    LatentTensor,
    LayerKind,
    LayerSpec,
    Precision,
    QuantizedArray,
    Role,
    conv_forward,
)
from .netsim import (
    GammaBandwidth,
    LinkModel,
    LinkTrace,
    Policy,
    delivered_prefix_fraction,
    sample_bandwidths,
    simulate,
)
from .reconstruct import (
    PartialLatent,
    QualityReport,
    inverse_transform,
    latent_mse,
    quality,
    rebuild_latent,
    reference_latent,
)
from .saliency import (
    ClassicalSaliency,
    CnnSaliency,
    FileSaliency,
    SaliencyMap,
    WireSaliency,
    detect_saliency,
    downsize_quantize,
    reconstruct_map,
    spectral_residual,
)
from .scoring import ChannelOrder, drop_lowest, gradual_scoring, priority_order
from .weights_io import load_weights, load_weights_file, save_weights, save_weights_file

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
