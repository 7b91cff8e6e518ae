"""Counter-based uniform variates keyed by (seed, stream, index).

Every integer index gets its own variate, so any sub-range of indices can be
generated independently (and in parallel) and still agree with a full draw.
"""
import numpy as np

MASK64 = (1 << 64) - 1
_WORDS_PER_BLOCK = 4  # Philox4x64 emits four 64-bit words per counter value


def philox_key(seed: int, stream: int = 0) -> int:
    return (seed & MASK64) | ((stream & MASK64) << 64)


def raw_words(seed: int, lo: int, hi: int, stream: int = 0) -> np.ndarray:
    if lo < 0:
        raise ValueError(f"index range must be non-negative, got lo={lo}")
    if hi <= lo:
        return np.empty(0, dtype=np.uint64)
    skip = lo % _WORDS_PER_BLOCK
    gen = np.random.Philox(key=philox_key(seed, stream), counter=lo // _WORDS_PER_BLOCK)
    return gen.random_raw(hi - lo + skip)[skip:]


def uniforms(seed: int, lo: int, hi: int, stream: int = 0) -> np.ndarray:
    """Uniform [0, 1) doubles for the indices ``lo <= n < hi``."""
    raw = raw_words(seed, lo, hi, stream)
    return (raw >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)
