"""Eigenvalues of the global Laplacian on a jittered periodic cloud.

A stable diffusion operator has no eigenvalue with positive real part.
The Morris SPH weights are symmetric in i and j, so its spectrum is real.
LABFM weights are not, which shows up as small imaginary parts.

Run: python demos/spectrum.py
"""
from meshfree.diagnostics.providers import LabfmProvider, SphProvider
from meshfree.diagnostics.spectral import assemble_global, eigen_spectrum
from meshfree.geometry import unit_square_cloud

cloud = unit_square_cloud(1 / 24, epsilon=1.0, seed=2)
for provider in (SphProvider("wendland"), LabfmProvider(2), LabfmProvider(4)):
    G = assemble_global(provider, cloud, "laplacian")
    rep = eigen_spectrum(G, cloud.spacing, m=2)
    print(f"{provider.name:14s} {rep.n_nodes} eigenvalues of s^2 L: "
          f"max Re {rep.max_real: .3e}, min Re {rep.eigenvalues.real.min(): .2f}, "
          f"max |Im| {rep.max_abs_imag:.2e}")
