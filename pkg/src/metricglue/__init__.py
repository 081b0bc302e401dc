"""Glue uniformly bilipschitz embeddings of finite pieces into one global map.

Points live in finitely supported l_p sequence space; see :mod:`metricglue.seqspace`.
"""
from .audit import (AuditConstants, CoarseModuli, DistortionReport, PairReport, check_case_bounds,
                    check_tau_bounds, classify_case, distortion, empirical_moduli)
from .chain import (EmbeddedNet, ScaleChain, SelectionCertificate, SelectionConstants, WeakLimitTable,
                    frechet_embed, frechet_pieces, lift_space, net_from_lattice, select_subsequence,
                    shell_of, synthetic_chain, validate_chain, verify_certificate, weak_limit)
from .errors import (BoundViolated, ConfigError, DegenerateImage, GeneratorOverflow, GlueError,
                     HorizonExhausted, InvalidChain, JitterTooLarge, NoConvergence, NonUniform,
                     OutOfRange, ZeroVector)
from .glue import AugmentedMap, GluedMap, HatMap, TauPath, build_tau, tau
from .metricspace import (LocallyFiniteSpace, ShellDecomposition, from_matrix, make_lattice, make_tree,
                          shells, validate_space)
from .seqspace import DualVector, NormSpec, SparseVector, dist_to_span, fresh_direction, norm, norming_functional

__version__ = "0.1.0"
