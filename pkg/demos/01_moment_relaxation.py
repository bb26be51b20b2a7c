# %% Moment relaxations of a small nonconvex problem
# minimize -x1 over the intersection of a disc, a hyperbola-bounded region and
# x1*x2 >= -1.  The first relaxation is loose; the second one is exact and the
# minimizer can be read off its moment matrix.
import numpy as np

from fundmat import Polynomial, SemiAlgebraicProblem, solve_relaxation
from fundmat.polyopt import enumerate_basis, moment_matrix

x1, x2 = Polynomial.variables(2)
prob = SemiAlgebraicProblem(-x1, inequalities=(3 - 2 * x2 - x1 * x1 - x2 * x2,
                                               -x1 - x2 - x1 * x2,
                                               1 + x1 * x2))

# %% the hierarchy
for t in (1, 2, 3):
    r = solve_relaxation(prob, t)
    print(f"t={t}  bound {r.optimum:+.8f}  ranks {r.moment_matrix_ranks}  certified {r.certified}")
    if r.certified:
        print("   minimizers:", [np.round(x, 8) for x in r.minimizers])

print("golden ratio:", (1 + 5 ** 0.5) / 2)

# %% what the order-2 moment matrix looks like at the optimum
r = solve_relaxation(prob, 2)
print(enumerate_basis(2, 2).monomials)
print(np.round(moment_matrix(r.moments, 2), 5))
print("singular values:", np.linalg.svd(moment_matrix(r.moments, 2), compute_uv=False))
