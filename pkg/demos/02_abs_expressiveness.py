"""
GroupSort versus ReLU under a norm constraint
=============================================

With every layer constrained to 1-norm at most 1, a ReLU network cannot
represent ``|x|``: fitting both slopes needs unit gradient through the
activation everywhere, which an element-wise activation only has if it is
linear. GroupSort only permutes its inputs and keeps the full gradient.
"""

# %%
import time

from monolip import abs_fit_experiment

for activation in ("groupsort", "relu"):
    t0 = time.time()
    mse = abs_fit_experiment(activation, depth=3, width=16, lam=1.0, seed=0)
    print(f"{activation:>9}: test MSE on |x| = {mse:.2e}  ({time.time() - t0:.0f}s)")

# %%
# A linear target is easy for both.
for activation in ("groupsort", "relu"):
    print(f"{activation:>9}: test MSE on x = {abs_fit_experiment(activation, target='linear', epochs=300):.2e}")
