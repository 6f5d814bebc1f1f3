"""Tangent, normal, and critical cones of the PSD cone.

Builds the cone context at a complementary pair (X, Y) and probes the
three cones with hand-picked directions, then checks the graph test
that couples primal and dual displacements.
"""

import numpy as np

from kkt_spectra import (
    SymMat,
    cone_context,
    critical_cone_psd_membership,
    graph_tangent_membership,
    is_normal_cone_polyhedral,
    normal_membership,
    project_critical_cone,
    strict_complementarity,
    tangent_membership,
)

# A complementary pair: X PSD, Y NSD, XY = 0, with one eigenvalue of
# X + Y positive, one zero, one negative.
X = SymMat.diag([2.0, 0.0, 0.0])
Y = SymMat.diag([0.0, 0.0, -3.0])
ctx = cone_context(X, Y)
d = ctx.decomp
print("partition sizes:", len(d.alpha), len(d.beta), len(d.gamma))

# Tangent cone at X: directions whose gamma-frame block is PSD after
# restriction to the kernel of X.
H_in = SymMat.diag([1.0, 0.5, 0.0])
H_out = SymMat.diag([0.0, -0.5, 0.0])
print("tangent, kernel-PSD direction:", tangent_membership(ctx, H_in))
print("tangent, kernel-NSD direction:", tangent_membership(ctx, H_out))

# Critical cone at (X, Y): tangent directions orthogonal to Y. Activity
# in the gamma block kills membership.
H_gamma = SymMat.diag([1.0, 0.5, 1.0])
print("critical, direction touching the active block:", critical_cone_psd_membership(ctx, H_gamma))
print("critical, direction avoiding it:", critical_cone_psd_membership(ctx, H_in))

# Normal cone membership for the dual side.
print("normal, NSD matrix supported on the kernel:", normal_membership(ctx, SymMat.diag([0.0, -1.0, -2.0])))
print("normal, matrix with a positive eigenvalue:", normal_membership(ctx, SymMat.diag([0.0, 1.0, -2.0])))

# Projection onto the critical cone clips exactly the offending blocks.
G = SymMat(np.array([[1.0, 2.0, 0.5], [2.0, -1.0, 0.0], [0.5, 0.0, 4.0]]))
PG = project_critical_cone(ctx, G)
print("projection onto the critical cone:")
print(PG.full())
assert critical_cone_psd_membership(ctx, PG)

# Graph test: a pair (U, V) of primal and dual displacements lies in
# the graph tangent when the blocks couple correctly. The derivative
# characterization must agree with the blockwise one.
U = SymMat.diag([0.3, 0.7, 0.0])
V = SymMat.diag([0.0, 0.0, -0.2])
print("graph tangent, complementary blockwise pair:", graph_tangent_membership(ctx, U, V))
V_bad = SymMat.diag([0.0, -0.2, -0.2])
print("graph tangent, beta blocks overlapping:", graph_tangent_membership(ctx, U, V_bad))

# Degeneracy flags. A zero eigenvalue shared by X and Y breaks strict
# complementarity; the normal cone is polyhedral only when the rank of
# X nearly fills the matrix.
print("strict complementarity:", strict_complementarity(ctx))
print("normal cone polyhedral:", is_normal_cone_polyhedral(ctx))

ctx_strict = cone_context(SymMat.diag([2.0, 1.0, 0.0]), SymMat.diag([0.0, 0.0, -3.0]))
print("strict pair, complementarity:", strict_complementarity(ctx_strict))
print("strict pair, polyhedral:", is_normal_cone_polyhedral(ctx_strict))
