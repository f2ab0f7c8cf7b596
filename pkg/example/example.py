import logging

import rwglobal
from rwglobal.aksz import default_model, mdcme_boundary_term, boundary_model
from rwglobal.weights import as_symmetry_check

logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")

n = 1
K = 3
seed = 7

# Random jets with a symplectically compatible connection
geo = rwglobal.make_geometry(n, K, seed=seed)

# Exponential map and Grothendieck connection
phi = rwglobal.geodesic_exp(geo, 3)
R = rwglobal.grothendieck(phi)
print("Grothendieck flatness:", rwglobal.flatness_residual(R).residual)

# Fedosov connection and the L-infinity products it induces
I = rwglobal.fedosov_solve(geo, 4)
l0, l1, l2 = rwglobal.extract_linf(geo, I)
print("Fedosov correction weights:", I.weights())

# Bulk vertex tensor
print("Vertex symmetry:", as_symmetry_check(geo).to_dict())

# Boundary graphs with three bulk vertices of valence three
entries = rwglobal.enumerate_bfv(3, max_valence=3)
print(len(entries), "balanced graphs,", sum(e.verdict.keep for e in entries), "surviving")

# Master equations of the split action
print("dCME:", rwglobal.dcme_residuals(default_model(), geo).pieces)
print("mdCME defect:", mdcme_boundary_term(boundary_model(), geo, seed=seed).defect)
