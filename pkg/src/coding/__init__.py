"""
Coding substrate: GF(2^8) algebra, LT fountain coding and MDS key codes.
"""
from .gf256 import FieldMatrix, add, mul, inv, mat_vec_mul, invert
from .fountain import (
    FountainSpec,
    DegreeDistribution,
    PeelingState,
    robust_soliton,
    sample_spec,
    encode,
)
from .keycode import (
    KeyGenerator,
    RoundKeys,
    build_generator,
    fresh_round_keys,
    encode_key_row,
    combine_key_results,
)

__all__ = [
    # Field
    "FieldMatrix",
    "add",
    "mul",
    "inv",
    "mat_vec_mul",
    "invert",
    # Fountain
    "FountainSpec",
    "DegreeDistribution",
    "PeelingState",
    "robust_soliton",
    "sample_spec",
    "encode",
    # Keys
    "KeyGenerator",
    "RoundKeys",
    "build_generator",
    "fresh_round_keys",
    "encode_key_row",
    "combine_key_results",
]
