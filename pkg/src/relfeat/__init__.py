"""Learn the most relevant feature pairs of a joint distribution.

Two small networks map the two sides of paired samples to k0 features
each; training maximizes the trace of squared canonical correlations
between the feature sets.  Exact finite-space machinery (channel SVD,
truncations) and closed-form Gaussian results serve as verification
oracles, and fitted features support conditional-expectation inference and
classification on new observations.
"""

__version__ = "0.1.0"

from .covariance import (CovarianceTriple, Stabilizer, covariances, half_inverse,
                         loss, projector_overlap, relevance, stable_inverse)
from .discrete import (CanonicalDecomposition, JointDistribution, apply_channel,
                       channel_svd, chi2, conditional_expectation,
                       exact_covariances, fisher_inner, frobenius_distance,
                       load_joint_csv, save_joint_csv, truncated_joint)
from .network import FeatureNetwork, Gradients, loss_and_feature_grads
from .training import (CanonicalSpectrum, NonFiniteLossError, TrainConfig,
                       TrainedModel, eval_loss, extract_canonical, load_model,
                       save_model, train)
from .inference import (InferenceModel, Posterior, X_FROM_Y, Y_FROM_X, classify,
                        classify_batch, coordinate_targets, fit_statistics, infer,
                        infer_batch, posterior_direction_of_max_variance)
from .gaussian import (GaussianPair, exact_KLA, exact_loss, exact_posterior_moments,
                       exact_relevances, exact_singular_values, monomial_features)
from .datasets import (PairDataset, gen_discrete_joint, gen_gaussian_pair,
                       gen_labeled_blobs, gen_ring_disk, load_pairs_csv, one_hot,
                       regenerate, sample_pairs, save_pairs_csv)
