"""
Numeric Kernels
Dense float64 helpers, activations and seeded randomness shared by every module.

Vectors and matrices are plain numpy arrays (float64). The activation
functions accept scalars or arrays and apply elementwise.
"""

from typing import Union

import numpy as np

from .errors import ConfigError, ShapeError

ArrayLike = Union[float, np.ndarray]


class SeededRng:
    """
    Deterministic random stream.

    Wraps numpy's Generator over the counter-based Philox-4x64 bit generator,
    whose output for a given seed is identical on every platform numpy supports.
    Single-owner: never share one instance between threads.
    """

    algorithm = "philox4x64"

    def __init__(self, seed: int):
        if seed < 0 or seed >= 2 ** 64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.Philox(self.seed))

    def uniform(self, low: float, high: float, size) -> np.ndarray:
        return self._gen.uniform(low, high, size)

    def random(self, size) -> np.ndarray:
        return self._gen.random(size)

    def normal(self, scale: float, size) -> np.ndarray:
        return self._gen.normal(0.0, scale, size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def integers(self, low: int, high: int, size=None):
        return self._gen.integers(low, high, size)

    def child(self, salt: int) -> "SeededRng":
        """Independent stream derived from this generator's seed."""
        return SeededRng((self.seed * 1_000_003 + salt) % (2 ** 64))


def matvec(m: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Matrix-vector product m @ v; single-example form of the batched matmuls in src/model.py."""
    if m.ndim != 2 or v.ndim != 1 or m.shape[1] != v.shape[0]:
        raise ShapeError(f"matvec: cannot multiply {m.shape} by {v.shape}")
    return m @ v


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """
    Cosine similarity of two vectors.

    Returns 0.0 when either vector has zero norm (PAD / unknown words).
    Single-pair form of model.batched_cosine, which training and decoding use.
    """
    if a.shape != b.shape or a.ndim != 1:
        raise ShapeError(f"cosine: shapes {a.shape} and {b.shape} differ")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def sigmoid(x: ArrayLike) -> ArrayLike:
    """Logistic function, evaluated without overflow for large |x|."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


def tanh_(x: ArrayLike) -> ArrayLike:
    out = np.tanh(np.asarray(x, dtype=np.float64))
    return out if out.ndim else float(out)


def relu(x: ArrayLike) -> ArrayLike:
    out = np.maximum(np.asarray(x, dtype=np.float64), 0.0)
    return out if out.ndim else float(out)


def softmax(scores: np.ndarray) -> np.ndarray:
    """Softmax with max-subtraction."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1 or scores.size == 0:
        raise ShapeError("softmax needs a non-empty vector")
    shifted = np.exp(scores - scores.max())
    return shifted / shifted.sum()


def bernoulli_mask(rng: SeededRng, shape, keep_prob: float) -> np.ndarray:
    """
    Inverted-dropout mask: 1/keep_prob with probability keep_prob, else 0.

    Args:
        rng: Random stream (advanced by this call unless keep_prob == 1)
        shape: Mask length or shape tuple
        keep_prob: Probability of keeping a unit, in (0, 1]

    Returns:
        float64 mask of the requested shape
    """
    if not 0.0 < keep_prob <= 1.0:
        raise ConfigError(f"keep_prob must be in (0, 1], got {keep_prob}")
    if keep_prob == 1.0:
        return np.ones(shape)
    keep = rng.random(shape) < keep_prob
    return keep / keep_prob
