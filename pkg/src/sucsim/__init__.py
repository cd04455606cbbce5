"""Simulation toolkit for secret unknown ciphers: random SPN cipher classes,
template-bitstream personalization, TA identification and analysis."""
from .cipher_i import ISucSpec, i_apply
from .cipher_ni import NiSucSpec, ni_decrypt, ni_encrypt
from .genie import build_template, load_device, lock, personalize
from .kernels import BACKEND
from .sbox import SBox4, enumerate_involutive_optimal, is_optimal, sample_optimal
from .trng import Trng

__version__ = "0.1.0"
