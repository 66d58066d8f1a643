import numpy as np


def substream(seed: int, *index: int) -> np.random.Generator:
    """
    Independent random stream addressed by a master seed and an index path.

    The generator is Philox, which is counter based: the stream for a
    given (seed, index) does not depend on which other streams were drawn,
    or in which order, so serial and parallel runs agree.

    Parameters
    ----------
    seed : int
        Master seed, non-negative.
    *index : int
        Path of the substream, e.g. (block,) or (replicate, 0).

    Returns
    -------
    numpy.random.Generator
    """
    sequence = np.random.SeedSequence(int(seed), spawn_key=tuple(int(i) for i in index))
    return np.random.Generator(np.random.Philox(sequence))


def replicate_seed(seed: int, replicate: int) -> int:
    """64-bit seed of one Monte Carlo replicate"""
    sequence = np.random.SeedSequence(int(seed), spawn_key=(int(replicate),))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])
