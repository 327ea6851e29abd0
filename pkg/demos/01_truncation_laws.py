"""Random horizons: survival functions, sampling and the CLI grammar."""

# %%
import numpy as np

from exact_estimation import cli, truncation

rng = np.random.default_rng(0)

# %% the same grammar the command line accepts
for text in ("geom:0.5", "geom:0.95", "invk", "poly:2:1", "seq:1,0.8,0.4,0.2", "inf"):
    law = cli.parse_truncation(text)
    head = [round(law.survival(k), 4) for k in range(6)]
    print(f"{text:>18}  S(0..5) = {head}  E N = {law.mean:.4g}  mass at inf = {law.tail_mass_at_infinity:.3g}")

# %% sampled horizons reproduce the survival function
law = truncation.geometric(0.8)
n = law.sample(rng, 100_000)
for k in (1, 3, 10):
    print(f"P(N >= {k:2d}): empirical {np.mean(n >= k):.4f}, exact {law.survival(k):.4f}")

# %% invk has a finite horizon almost surely but an infinite mean
n = truncation.inverse_k().sample(rng, 100_000)
print("invk: largest of 1e5 horizons", int(n.max()), "| running mean", n.mean())

# %% malformed specs are rejected with the offending token
try:
    cli.parse_truncation("geom:1.5")
except ValueError as exc:
    print("rejected:", exc)
