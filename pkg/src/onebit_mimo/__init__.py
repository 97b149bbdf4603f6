"""One-bit massive MIMO downlink: simulation, asymptotics, and reduced models."""
from .asymptotics import (AsymptoticConstants, MarchenkoPastur,
                          asymptotic_constants, asymptotic_sep, mp_cdf,
                          mp_expect, mp_pdf, mp_sample, optimal_shaper,
                          snr_mf_closed, snr_opt_closed, snr_opt_naive,
                          snr_zf_closed)
from .channel import (QPSK_POINTS, SvdFactors, SystemConfig,
                      nearest_neighbor_decode, one_bit_quantize,
                      sample_channel, sample_symbols, svd)
from .equivalence import (ConvergenceRow, EquivalentDraw, HdTrace, MatchReport,
                          convergence_report, direct_model_samples,
                          distribution_match_test, equivalent_model_draw,
                          equivalent_model_samples, haar_sample,
                          hd_iterative_draw, hd_model_samples)
from .montecarlo import (SerEstimate, confidence_interval, estimate_ser,
                         transmit_once)
from .numerics import (QuadratureRule, RngStream, chebyshev_rule, q_function,
                       reflector)
from .precoding import (DegenerateChannelError, SpectralShaper, build_precoder,
                        optimal_rho, rzf_direct, shaper_eval)

__version__ = "0.1.0"
