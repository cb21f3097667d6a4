"""Shared builders for randomized test systems.

Every test that draws random blocks goes through one of these helpers so
the whole suite is reproducible from explicit integer seeds.
"""

import numpy as np

from tmcount import BlockTridiagonalSystem


def random_system(rng: np.random.Generator, m: int, n: int,
                  hermitian: bool = False) -> BlockTridiagonalSystem:
    """Random dense complex blocks with well-conditioned couplings.

    The +3I shift keeps every B_k and C_k comfortably invertible, so
    transfer factors and determinant ratios stay in a benign range.  With
    hermitian=True the periodic operator H(z) is Hermitian on |z| = 1:
    A_k = A_k^dagger, C_k = B_{k-1}^dagger and the ring closure
    C_1 = B_n^dagger.
    """
    def gblock():
        return (rng.standard_normal((m, m))
                + 1j * rng.standard_normal((m, m))) / np.sqrt(2.0)

    A = []
    B = []
    for _ in range(n):
        a = gblock()
        if hermitian:
            a = a + a.conj().T
        A.append(a)
        B.append(gblock() + 3.0 * np.eye(m))
    if hermitian:
        C = [B[k - 1].conj().T for k in range(n)]
    else:
        C = [gblock() + 3.0 * np.eye(m) for _ in range(n)]
    return BlockTridiagonalSystem.from_blocks(A, B, C)


def scalar_chain(n: int, a: float = 0.0, b: float = 1.0,
                 c: float = 1.0) -> BlockTridiagonalSystem:
    """Uniform 1x1 system: c*u_{k-1} + a*u_k + b*u_{k+1} = E*u_k."""
    return BlockTridiagonalSystem.from_blocks(
        [[[a]]] * n, [[[b]]] * n, [[[c]]] * n)


def system_grid(count: int, seed: int, m_choices=(1, 2, 3),
                n_choices=(3, 4, 5, 6), hermitian: bool = False):
    """Deterministic stream of (rng, system) pairs for sweep tests."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        m = int(rng.choice(m_choices))
        n = int(rng.choice(n_choices))
        out.append(random_system(rng, m, n, hermitian=hermitian))
    return rng, out
