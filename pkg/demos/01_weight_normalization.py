"""
Bounding the Lipschitz constant with weight normalization
==========================================================

A dense network with a 1-Lipschitz activation is ``lam``-Lipschitz in the
1-norm when the operator 1-norms of its weight matrices multiply to at most
``lam``. This script compares the three normalizations on a random matrix
and shows the product bound on a whole network.
"""

# %%
import numpy as np

from monolip import NetworkSpec, Scheme, initialize, lipschitz_product
from monolip.constraints import NormScheme
from monolip.linalg import column_abs_sums, one_norm

rng = np.random.default_rng(0)
W = rng.normal(size=(4, 3))
print("raw column sums:", column_abs_sums(W).round(3), " 1-norm:", round(one_norm(W), 3))

# %%
# With lam = 8 spread over m = 3 layers each layer may have norm 2.
for variant in (Scheme.VARIANT_A, Scheme.VARIANT_B, Scheme.COLUMN_WISE):
    s = NormScheme(variant, lam=8.0, num_layers=3)
    Wn = s.apply(W)
    print(f"{variant.value:>11}: column sums {column_abs_sums(Wn).round(3)}  norm {one_norm(Wn):.3f} (budget {s.budget:.3f})")

# %%
# Column-wise normalization only touches the columns that exceed the budget,
# so it leaves more of the matrix intact than rescaling the whole thing.
W[:, 0] *= 0.1
cw = NormScheme(Scheme.COLUMN_WISE, 8.0, 3).apply(W)
vb = NormScheme(Scheme.VARIANT_B, 8.0, 3).apply(W)
print("first column kept by column-wise:", np.allclose(cw[:, 0], W[:, 0]), " by variant B:", np.allclose(vb[:, 0], W[:, 0]))

# %%
# The product bound on a network, before and after blowing up its raw weights.
net = initialize(NetworkSpec(input_dim=3, hidden_widths=(16, 16), group_size=4, lam=2.0))
print("product after init:", round(lipschitz_product(net), 4))
for layer in net.layers:
    layer.weights = layer.weights * 100
net.bump_version()
print("product with 100x raw weights:", round(lipschitz_product(net), 4), "<= 2")

X, Y = rng.normal(size=(2, 50_000, 3))
ratio = np.abs(net.g(X) - net.g(Y)) / np.abs(X - Y).sum(axis=1)
print("largest sampled |g(x)-g(y)| / |x-y|_1:", round(ratio.max(), 4))
