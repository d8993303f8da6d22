"""Deep discrete encoders: multilayer binary-latent directed models with
exact likelihood tools, spectral initialization, penalized (SA)EM fitting,
identifiability checkers, and evaluation metrics."""

from .benchmarks import make_benchmark_params
from .errors import (CapacityError, DdeError, NumericError, ShapeError,
                     UnsupportedFamilyError, ValidationError)
from .estimation import (FitConfig, FitReport, GibbsSampler, default_lambda,
                         default_tau, fit, gibbs_sweep, grid_fit,
                         penalized_loglik, penalty_value, pem_fit,
                         random_init, saem_fit, tuning_grid)
from .evaluation import (Alignment, TopicMetrics, accuracy_G, align,
                         align_latents, apply_alignment, ebic, ebic_select,
                         hungarian, lrt_select, perplexity, posterior_latents,
                         reconstruct, rmse_theta, topic_metrics)
from .identifiability import (ConditionReport, check_condition_A,
                              check_condition_B, check_condition_C,
                              max_bipartite_matching,
                              validate_model_assumptions, verify_certificate)
from .io import (load_dataset, load_latents, load_matrix, load_model,
                 save_latents, save_matrix, save_model)
from .model import (BERNOULLI, ENUM_CAP, NORMAL, POISSON, Dataset, DdeModel,
                    GraphSet, LatentAssignment, ObservedFamily,
                    family_from_name, graphs_from_coefficients, loglik,
                    marginal_logprob, row_logliks, sample)
from .spectral import (SpectralConfig, SpectralInit, select_latent_dims,
                       spectral_init, varimax)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
