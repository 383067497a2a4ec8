"""Dense linear-algebra substrate: cached SVD factors, spectral quantities,
and the measurement model bundle consumed by every solver.

The measurement model is  A (u + v) + xi = y  with an s-sparse signal u,
dense signal-domain noise v (amplified by A, the noise-folding effect) and
measurement-domain noise xi.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .validation import as_matrix, as_vector, check_support

__all__ = [
    "SvdFactors",
    "ProblemInstance",
    "compute_svd",
    "spectral_norm",
    "min_singular_on_support",
]


@dataclass(frozen=True)
class SvdFactors:
    """Thin (economy) SVD of a matrix: A = left @ diag(singular_values) @ right_t.

    ``left`` is m x r with orthonormal columns, ``right_t`` is r x n with
    orthonormal rows, and the singular values are sorted nonincreasing
    (r = min(m, n)).  Thin factors carry the full column/row space of A,
    which is all any consumer here needs; all downstream quantities are
    invariant under the sign ambiguity of the factors.
    """

    left: np.ndarray
    singular_values: np.ndarray
    right_t: np.ndarray

    def reconstruct(self):
        return (self.left * self.singular_values) @ self.right_t

    @property
    def rank_tol(self):
        """Cutoff below which singular values are treated as zero."""
        return 1e-12 * (self.singular_values[0] if self.singular_values.size else 0.0)


def compute_svd(matrix) -> SvdFactors:
    """Economy SVD with singular values sorted nonincreasing.

    Raises ValueError on non-finite or empty input.
    """
    a = as_matrix(matrix)
    left, s, right_t = scipy.linalg.svd(a, full_matrices=False)
    return SvdFactors(left=left, singular_values=s, right_t=right_t)


def spectral_norm(matrix) -> float:
    """Largest singular value."""
    a = as_matrix(matrix)
    return float(scipy.linalg.svdvals(a)[0])


def min_singular_on_support(matrix, support) -> float:
    """Smallest eigenvalue of A_I^T A_I, i.e. the squared smallest singular
    value of the column submatrix A_I."""
    a = as_matrix(matrix)
    idx = check_support(support, a.shape[1])
    sub = a[:, idx]
    svals = scipy.linalg.svdvals(sub)
    smin = svals[-1] if sub.shape[0] >= sub.shape[1] else 0.0
    return float(smin) ** 2


@dataclass(frozen=True)
class ProblemInstance:
    """Measurement model bundle: y = A (u + v) + xi.

    ``ground_truth`` (u), ``pre_noise`` (v) and ``post_noise`` (xi) are
    optional; when all three are present the instance is checked for
    consistency with the observation at construction.
    """

    matrix: np.ndarray
    observation: np.ndarray
    ground_truth: np.ndarray | None = None
    pre_noise: np.ndarray | None = None
    post_noise: np.ndarray | None = None

    def __post_init__(self):
        a = as_matrix(self.matrix)
        y = as_vector(self.observation, length=a.shape[0], name="observation")
        object.__setattr__(self, "matrix", a)
        object.__setattr__(self, "observation", y)
        n = a.shape[1]
        for name, length in (("ground_truth", n), ("pre_noise", n), ("post_noise", a.shape[0])):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, as_vector(val, length=length, name=name))
        if (
            self.ground_truth is not None
            and self.pre_noise is not None
            and self.post_noise is not None
        ):
            resid = a @ (self.ground_truth + self.pre_noise) + self.post_noise - y
            bound = 1e-12 * (1.0 + float(np.linalg.norm(y)))
            if float(np.linalg.norm(resid)) > bound:
                raise ValueError(
                    "inconsistent problem instance: ||A(u+v)+xi - y|| = "
                    f"{np.linalg.norm(resid):.3e} exceeds {bound:.3e}"
                )

    @property
    def m(self):
        return self.matrix.shape[0]

    @property
    def n(self):
        return self.matrix.shape[1]
