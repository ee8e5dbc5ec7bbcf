"""Low-rank graph quilting.

Estimate a covariance observed only on overlapping blocks of variables,
complete it with a low-rank model and read a sparse graph off the
graphical lasso.
"""

from .bsvd import InsufficientOverlapError, bsvd_complete, procrustes_align
from .covariance import (Block, BlockData, DegeneratePairError,
                         compute_block_covariance, effective_rank,
                         estimate_noise_variance, project_psd)
from .factor import lrf_complete_exact, lrf_complete_spiked
from .glasso import edge_set, graphical_lasso, zero_impute
from .metrics import (MetricsRecord, edge_scores, f1_score, frobenius_error,
                      hub_overlap, infinity_error, preprocess_traces)
from .nuclear import nn_complete_exact, nn_complete_spiked, svt
from .selection import (match_edge_count, select_lambda_stability,
                        select_nu_cv, select_rank_bic)
from .simulate import (gen_er_precision, gen_multistar_precision,
                       gen_sbm_precision, gen_spiked_precision,
                       make_block_pattern, make_pd, sample_ggm,
                       verify_spiked_decomposition)
from .types import (BlockDesign, CompletedCovariance, GroundTruth,
                    ObservedCovariance, PrecisionGraph)

__version__ = "0.1.0"
