"""Point-centered neighbor search over streamline segments and the tasks
built on it: vector-field reconstruction, segment saliency, and the sweep
harness that compares search strategies statistically."""

from .analysis import (ccc, dominance_groups, histogram, pcc,
                       percentile_groups, sparse_rbn_report)
from .errors import (AlignmentError, CapacityError, DegenerateInputError,
                     EmptyIndexError, EmptyNeighborhoodError, FlowsegError,
                     GridFormatError, InvalidGridError, OutOfDomainError)
from .field import (AnalyticField, DomainBounds, GridField, ScalarGrid,
                    analytic_field, gradient_magnitude_field, load_grid,
                    rasterize, rms_speed, sample, sample_many, save_grid)
from .harness import (ExperimentConfig, ExperimentReport, default_config,
                      load_config, run_matrix, select_best)
from .neighborhood import (IcosaBins, UniformityResult, average_distance,
                           build_icosa_bins, exact_face_of, lookup_face_of,
                           uniformity)
from .reconstruct import (ReconstructionRecord, WeightScheme,
                          reconstruct_field, reconstruct_vector,
                          segment_vector, segment_vectors)
from .saliency import (SaliencyConfig, SaliencyRecord, calculated_saliency,
                       reference_saliency, saliency_sweep, score_segments)
from .search import (DistanceMetric, Neighborhood, SearchConfig,
                     SegmentIndex, build_index, knn, knn_batch, knn_config,
                     point_segment_distance, rbn, rbn_batch, rbn_config)
from .tracer import (SeedSpec, Segment, SegmentSet, Streamline, decompose,
                     generate_seeds, load_lines, save_lines, trace,
                     trace_many)

__version__ = "0.1.0"
