"""Weights at a single node from the three classical constructions.

Run: python demos/stencil_weights.py
"""
import numpy as np

from meshfree.classical_ops import LabfmConfig, SphConfig, labfm_weights, sph_weights
from meshfree.geometry import knn_stencils, radius_stencils, unit_square_cloud
from meshfree.taylor import monomial_labels, moment_residual, test_function

cloud = unit_square_cloud(1 / 32, epsilon=1.0, seed=0)
node = 500
print(cloud, "node", node, "at", cloud.points[node])

phi = test_function(cloud.points)[0]
exact_dx = test_function(cloud.points[node])[1]

# LABFM: k nearest neighbours, moments matched exactly up to order p
knn = knn_stencils(cloud, 35, centers=[node])
w_lab = labfm_weights(knn, LabfmConfig(order_p=2), "dx")

# SPH: every node inside the kernel support
cfg = SphConfig(kernel="quintic", spacing=cloud.spacing)
rad = radius_stencils(cloud, cfg.support_radius, centers=[node])
w_sph = sph_weights(rad, cfg, "dx")

for name, b, w, scale in (("LABFM p=2", knn, w_lab, knn.d_n), ("SPH quintic", rad, w_sph, cfg.h)):
    m = b.mask[0]
    nbr, wts = b.neighbors[0][m], w.weights[0][m]
    approx = np.sum((phi[nbr] - phi[node]) * wts)
    r = moment_residual(b.offsets[0][m], wts, "dx", 2, float(np.atleast_1d(scale)[0]))
    print(f"\n{name}: {m.sum()} neighbours, d/dx phi = {approx:.6f} (exact {exact_dx:.6f})")
    for lab, val in zip(monomial_labels(2), r):
        print(f"  moment residual {lab:7s} {val: .2e}")
