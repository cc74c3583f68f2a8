"""Polarization, polar coding, and joint successive-cancellation decoding
for two-user multiple-access channels over prime fields."""

from .channel import (Mac, PointChannel, build_adder_mac, build_extremal_mac,
                      canonicalize, load_mac, mac_from_dict, mac_from_table,
                      mac_to_dict, save_mac)
from .codec import (CodeSpec, PointCodeSpec, SimReport, bit_reversal_perm,
                    construct, corner_construct, corner_decode,
                    generator_matrix, polar_encode, polar_encode_inverse,
                    sc_decode_joint, simulate_block, simulate_corner,
                    wilson_interval)
from .errors import AlphabetCapError, ValidationError
from .field import FieldSpec, fq_add, fq_mul, fq_mul_inv, fq_neg, fq_sub, is_prime
from .metrics import (ExtremalClass, InfoTriple, bhattacharyya, classify,
                      info_triple, ml_error_prob, nearest_extremal,
                      point_info, region_vertices)
from .polarizer import (PolarizationReport, ReportEntry, genie_estimate,
                        index_to_path, path_to_index, polarization_stats,
                        polarize_exact, synthesize_path)
from .transform import (DEFAULT_ALPHABET_CAP, linear_channel, mac_minus,
                        mac_plus, marginal_channel, point_b, point_g)

__version__ = "0.1.0"
