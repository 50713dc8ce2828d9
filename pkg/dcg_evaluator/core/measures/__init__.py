from .measure import DiscreteMeasure, wasserstein1, empirical_from_samples
from .sources import (
    SourceSpec, GaussianSource, UniformSource, DiscreteSource, PointSource,
    QuantileSource, ParetoSource, uniform, discrete, point, source_from_dict,
)
from .quantize import (
    CellTree, MeanSplitQuantizer, quantize_discrete, quantize_source,
    quantization_error, compress, cell_coupling_error,
)
