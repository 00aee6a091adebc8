"""Numerical toolkit for intrinsic square functions on weighted Herz spaces."""
from .corpus import CorpusSpec, corpus_fields, sample_corpus
from .grid import Field, Grid, GridFunction, field_from_spec, lq_norm_weighted, make_grid, sample
from .herz import Annuli, HerzParams, herz_norm, weak_herz_norm, weak_lq_norm
from .kernels import KernelClassParams, build_dictionary, validate_kernel
from .sqfn import ConeQuadratureSpec, g_beta, g_star, s_beta, s_psi
from .verify import OperatorSpec, Setup, admissibility_check, theorem_ratio_sweep, weak_type_sweep
from .weights import ap_characteristic, build_ball_family, constant, parse_weight, power

__version__ = "0.1.0"
