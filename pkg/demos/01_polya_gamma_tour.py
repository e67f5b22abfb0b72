"""Tour of the exact Polya-Gamma sampler.

PG(1, c) is the mixing distribution that turns logit likelihoods into
conditionally Gaussian problems. Its mean and variance have closed
forms, which makes it easy to see that the rejection sampler is doing
the right thing: draw a million variates at several tilts and compare.
"""

import time

import numpy as np

from spmnl import PolyaGammaSampler, pg_mean, pg_variance

sampler = PolyaGammaSampler(seed=42)

print("tilt c      sample mean   E[PG(1,c)]   sample var    Var[PG(1,c)]   draws/s")
for c in (0.0, 0.5, 1.0, 2.0, 4.0, 10.0, 50.0):
    n = 1_000_000
    t0 = time.time()
    draws = sampler.draw_pg1_vector(np.full(n, c))
    rate = n / (time.time() - t0)
    print(
        "%6.1f    %10.6f   %10.6f   %10.6f   %10.6f   %8.2g"
        % (c, draws.mean(), pg_mean(c), draws.var(), pg_variance(c), rate)
    )

# the distribution only depends on |c|
plus = PolyaGammaSampler(1).draw_pg1_vector(np.full(200_000, 3.0))
minus = PolyaGammaSampler(2).draw_pg1_vector(np.full(200_000, -3.0))
print("\nsymmetry: mean at +3 = %.5f, at -3 = %.5f" % (plus.mean(), minus.mean()))

# reproducibility: the draw stream is a pure function of the seed
a = PolyaGammaSampler(7).draw_pg1_vector(np.linspace(-2, 2, 5))
b = PolyaGammaSampler(7).draw_pg1_vector(np.linspace(-2, 2, 5))
print("fixed seed reproduces draws exactly:", np.array_equal(a, b))
