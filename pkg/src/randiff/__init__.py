"""Random sparse sets of integers: sampling, concentration of correlation
sums, progressions with restricted differences, and ergodic averages along
random times on finite systems."""

from .profiles import Profile, RandomSet, partial_sums, sample
from .modular import ModuliSet, crt, crt_solve, optimal_params, select_moduli
from .intersectivity import FiniteSet, find_ap_with_difference_in
from .dynamics import FiniteSystem, Observable

__all__ = [
    "Profile", "RandomSet", "partial_sums", "sample",
    "ModuliSet", "crt", "crt_solve", "optimal_params", "select_moduli",
    "FiniteSet", "find_ap_with_difference_in",
    "FiniteSystem", "Observable",
]
__version__ = "0.1.0"
