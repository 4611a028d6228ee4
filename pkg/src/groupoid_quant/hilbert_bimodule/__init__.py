"""Hilbert bimodules: exact finite constructions and hbar-sampled grid lifts."""

from .finite import (Bibundle, Bimodule, KernelIdeal, Representation, bibundle_from_homomorphism,
                     bibundle_tensor, bimodule_from_bibundle, identity_bibundle, identity_bimodule,
                     interior_tensor, rieffel_induce, tensor_product_kernel, unitary_defects,
                     validate_bibundle)
from .grid import (PairTrivialFiber, RotationFiber, SectionBimodule, hilbert_classical_limit,
                   lift, pair_trivial_lift, rotation_lift, standard_battery,
                   strong_nondegeneracy_check)
