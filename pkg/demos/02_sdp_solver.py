# %% The interior-point solver on two problems with known answers
import numpy as np
from scipy import sparse

from fundmat.sdp import LmiBlock, SdpProblem, solve_sdp

rng = np.random.default_rng(0)

# smallest eigenvalue of a symmetric A:  max y  s.t.  A - y I >= 0
A = rng.standard_normal((6, 6))
A = A + A.T
blk = LmiBlock(A, sparse.csr_matrix(-np.eye(6).reshape(36, 1)), "A - yI")
sol = solve_sdp(SdpProblem(cost=[-1.0], blocks=[blk], eq_matrix=np.zeros((0, 1)), eq_rhs=[]))
print("IPM     :", sol.y[0], sol.status.value, sol.iterations, "iterations")
print("eigvalsh:", np.linalg.eigvalsh(A)[0])

# %% a correlation-matrix completion: minimize X12 with X13 = 0.5, X23 = -0.5, unit diagonal
# variables are the three off-diagonals (X12, X13, X23)
E = np.zeros((9, 3))
for k, (i, j) in enumerate([(0, 1), (0, 2), (1, 2)]):
    E[3 * i + j, k] = E[3 * j + i, k] = 1.0
blk = LmiBlock(np.eye(3), sparse.csr_matrix(E), "corr")
prob = SdpProblem(cost=[1.0, 0, 0], blocks=[blk], eq_matrix=[[0, 1, 0], [0, 0, 1]], eq_rhs=[0.5, -0.5])
sol = solve_sdp(prob)
print("min X12:", sol.y[0], "gap", sol.gap, "residuals", sol.primal_residual, sol.dual_residual)
print("eigenvalues at optimum:", np.linalg.eigvalsh(sol.block_values[0]))
