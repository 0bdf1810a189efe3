"""Relative error of the x-derivative against node spacing.

LABFM at order p converges like s^p; SPH stalls because its moments are
not consistent on scattered nodes.

Run: python demos/convergence.py
"""
from meshfree.diagnostics.accuracy import convergence_study
from meshfree.diagnostics.providers import LabfmProvider, SphProvider

providers = [SphProvider("quintic"), SphProvider("wendland"), LabfmProvider(2), LabfmProvider(4)]
spacings = [1 / 20, 1 / 40, 1 / 80]
rep = convergence_study(providers, "dx", spacings, epsilon=0.5, seed=3)

print(f"{'provider':14s}" + "".join(f"   s=1/{round(1 / s):<4d}" for s in rep.spacings) + "   slope")
for name, errs in rep.errors.items():
    print(f"{name:14s}" + "".join(f"  {e:9.2e}" for e in errs) + f"   {rep.slopes[name]:5.2f}")
