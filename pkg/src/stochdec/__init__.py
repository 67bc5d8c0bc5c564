"""Stochastic decision rules, constrained random-number generators over finite
fields, and the syndrome codes built on them."""

__version__ = "0.1.0"

from .codecs import (CodeSpec, EncodingError, Roundtrip, TrialOutcome, additive_noise_roundtrip,
                     channel_decode, channel_encode, compress, constrained_decode,
                     decompress_stochastic, sw_decode)
from .decision import (BoundViolation, DeterministicRule, LossConditionError, LossFunction,
                       SequenceDecisionConfig, StochasticRule, approximate_posterior_error_bound,
                       approximation_gap_bound, any_rule_check, error_probability,
                       error_upper_bound, iid_bound, mal_rule, map_rule, marginal_bound_check,
                       posterior_rule, risk, sequence_decide, sequence_error_exact,
                       sequence_risk_exact, subadditive_risk_bound, sup_loss_risk_bound,
                       tightness_identity, two_factor_check)
from .estimators import (MALDecision, MAPDecision, PosteriorSamplingDecision, SequenceDecision,
                         SyndromeCodec)
from .gf import (InfeasibleSystem, SparseCheckMatrix, SystematicForm, coset_members,
                 feasible_point, random_tree_checks, rank, syndrome, to_systematic)
from .gibbs import GibbsState, chain_distribution_oracle, gibbs_init, gibbs_run, gibbs_step
from .models import SourceModel, bsc, qary_symmetric
from .prob import (Alphabet, ConditionalDistribution, FiniteDistribution, JointDistribution,
                   decompose, joint_variational_distance, sample, variational_distance)
from .sumproduct import (EmptyCosetError, FactorGraph, ScheduleConfig, crng_exact_stepwise,
                         crng_sample, sp_marginal)
