"""Weighted aggregation of convolutional activation tensors into compact
image descriptors, with PCA whitening, exhaustive cosine search, query
expansion, and standard retrieval evaluation.

The usual flow:

    >>> import crow
    >>> cfg = crow.PipelineConfig.crow()                      # weighted preset
    >>> descs = [crow.run_pipeline(t, cfg) for t in tensors]  # normalized stage
    >>> model = crow.fit_whitening(held_out_descs, output_dim=32)
    >>> final = [crow.run_pipeline(t, cfg, model) for t in tensors]
    >>> index = crow.build_index(final)
    >>> ranked = crow.query(index, final[0])

Binary interchange lives in three small containers: ``.crowt`` for one
activation tensor, ``.crowd`` for a descriptor set, ``.croww`` for a
whitening model.
"""

from .aggregation import (
    FINAL,
    NORMALIZED,
    RAW,
    STAGES,
    WHITENED,
    Descriptor,
    PipelineConfig,
    check_unit_norm,
    pnorm,
    preset,
    read_descriptors,
    run_pipeline,
    sum_aggregate,
    weight_tensor,
    write_descriptors,
)
from .errors import (
    CrowError,
    DataError,
    DimensionError,
    FormatError,
    GroundTruthError,
    ParameterError,
    TruncationError,
)
from .evaluator import (
    EvalReport,
    GroundTruth,
    average_precision,
    compute_ap,
    evaluate,
    parse_groundtruth,
    parse_holidays,
    write_report,
)
from .search import (
    DEFAULT_QE_M,
    Index,
    RankedList,
    build_index,
    query,
    query_expand,
)
from .tensor import (
    FeatureTensor,
    PoolingSpec,
    iter_corpus,
    local_pool,
    read_manifest,
    read_tensor,
    tensor_bytes,
    write_manifest,
    write_tensor,
)
from .weighting import (
    ChannelWeights,
    SpatialNormSpec,
    SpatialWeightMap,
    centering_prior,
    channel_sparsities,
    channel_weights,
    generalized_norm,
    spatial_weights,
    uniform_channel,
    uniform_spatial,
    write_pgm,
)
from .whitening import (
    WhiteningModel,
    apply_whitening,
    finalize,
    fit_whitening,
    read_model,
    write_model,
)

__version__ = "0.1.0"
