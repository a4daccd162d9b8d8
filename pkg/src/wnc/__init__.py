"""wnc: distribution, delay and backlog bounds for wireless channel capacity.

Analytical bounds for the cumulative capacity process under comonotonic,
independent and Markov-additive dependence, feedback/self-interference and
multi-hop reductions, stochastic-order comparisons, and a Monte Carlo
queueing oracle that validates every bound.
"""

__version__ = "0.1.0"

from .distributions import DiscreteDistribution
from .errors import (HeavyTailError, NumericFailure, UnstableSystemError,
                     ValidationError, WncError)
from .fading import (ChannelSpec, FadingMarginal, FrequencySelective,
                     Lognormal, Nakagami, Rayleigh, Rice, TailCertificate,
                     Weibull, capacity_cdf, capacity_marginal,
                     capacity_quantile, capacity_tail, certify_light_tail,
                     cgf, tail_minplus_convolution)
from .processes import (Additive, AntitheticPairing, BoundReport,
                        CapacityProcess, Comonotonic, MarkovAdditive,
                        MarkovKernel, SpectralData, additive_cdf_bounds,
                        comonotonic_cdf, frechet_bounds, markov_cdf_bounds,
                        mgf_matrix, perron_frobenius, transient_bounds)
from .delay import (ArrivalSpec, DelayQuery, LundbergSolution, backlog_tail,
                    chebyshev_transient, delay_constrained_capacity,
                    delay_tail_additive, delay_tail_comonotonic,
                    delay_tail_markov, lundberg_root, stability_margin)
from .interference import (BivariateTrace, HopChain, e2e_delay_bound,
                           feedback_delay_additive, feedback_delay_markov,
                           minplus_convolve, multihop_service_bound,
                           single_hop_leftover)
from .ordering import (OrderVerdict, SampleSet, adjustment_ordering, cx_order,
                       delay_ordering_check, icx_order, st_order)
from .simulate import (SimConfig, TailEstimate, empirical_delay_tail,
                       feedback_queue, lindley_queue, sample_capacity_trace,
                       tandem_queue)
