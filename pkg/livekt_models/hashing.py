# livekt_models/hashing.py
#

'''
Seeded integer hashing shared by the hashed logistic regression features
and the MiniPFN value encoding. All functions are vectorized over numpy
arrays of unsigned 64-bit keys and wrap around on overflow.
'''

# Import packages
import numpy as np
from scipy.special import ndtri

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def splitmix64(keys):
    '''
    Function to apply the splitmix64 finalizer element-wise
    '''
    z = np.asarray(keys, dtype=np.uint64) + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def hash_keys(seed, *parts):
    '''
    Function to hash a seed together with broadcastable integer arrays
    into one uint64 array

    Parameters
    ----------
    :type seed: int
    :param seed: hash seed
    :param parts: integer arrays (or scalars), combined in order

    Returns
    -------
    :return: keys : np.ndarray of uint64
    '''
    h = splitmix64(np.array([seed], dtype=np.uint64))
    for part in parts:
        h = splitmix64(h ^ np.asarray(part).astype(np.uint64))
    return h


def hashed_slots(seed, columns, codes, dim):
    '''
    Map (column index, category code) pairs to slots in [0, dim); dim
    must be a power of two
    '''
    if dim <= 0 or dim & (dim - 1):
        raise ValueError('dim must be a power of two, got {0}'.format(dim))
    return (hash_keys(seed, columns, codes) &
            np.uint64(dim - 1)).astype(np.int64)


def hashed_unit_vectors(seed, families, codes, dim, dtype=np.float64):
    '''
    Function to map (column family, code) pairs to fixed pseudo-random
    unit vectors; equal pairs always get equal vectors

    Parameters
    ----------
    :type families: np.ndarray
    :param families: (n,) family ids
    :type codes: np.ndarray
    :param codes: (n,) category codes
    :type dim: int
    :param dim: vector length

    Returns
    -------
    :return: vectors : np.ndarray
        (n, dim) array of unit-norm rows
    '''
    families = np.asarray(families).reshape(-1, 1)
    codes = np.asarray(codes).reshape(-1, 1)
    bits = hash_keys(seed, families, codes, np.arange(dim).reshape(1, -1))
    # 53 high bits -> uniform in the open interval (0, 1)
    uniform = ((bits >> np.uint64(11)).astype(np.float64) + 0.5) / 2.0 ** 53
    gauss = ndtri(uniform)
    norms = np.sqrt(np.sum(gauss * gauss, axis=1, keepdims=True))
    return (gauss / norms).astype(dtype)
