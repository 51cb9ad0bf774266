"""Smoke test for the pynbshare extension.

Build and install first:
    maturin build --release -m crates/python/Cargo.toml -o dist
    pip install dist/pynbshare-*.whl
"""

import math

import pynbshare as nb


def close(a, b, tol=1e-9):
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


# worked example: power-limited, power dominant
game = nb.GameInstance.from_rates(
    [[0.5, 2.0, 1.0, 0.3], [0.1, 1.0, 3.0, 1.0]], tpc=[1.5, 1.5]
)
c = nb.classify(game)
assert c.kind == "power_dominant", c
assert close(c.tau, 0.25), c.tau
report = nb.solve(game)
reference = nb.fdm_ts_oracle(game)
assert report.log_nf <= reference.log_nf + 1e-9
assert close(report.log_nf, nb.log_nf(report.rates, report.disagreement))
print("worked example:", report)

# two users, mask only: exact solver against the grid
game = nb.GameInstance.random(2, 4, seed=1, cross_mean=1.0)
exact = nb.solve_two_user_smc(game)
grid = nb.grid_oracle(game, 1e-3)
assert exact.log_nf >= grid.log_nf - 1e-9
assert exact.log_nf - grid.log_nf < 1e-2
assert len(nb.tdmfdm_frontier(game)) >= 2
print("two users:", exact)

# four users through the dual iteration
game = nb.GameInstance.random(4, 6, seed=1, cross_mean=1.0)
try:
    dual = nb.run_dual(game, delta=0.2, xi=1e-5, max_iters=100000)
    ref = nb.projected_gradient_log_nf(game)
    print("dual:", dual, "reference log-NF", ref)
except RuntimeError as e:
    print("dual did not settle:", e)

# water-filling honours the caps and the budget
power, rate = nb.waterfill([1.0, 0.5, 0.1], 1.0, [0.6, 0.6, 0.6])
assert all(p <= 0.6 + 1e-12 for p in power)
assert close(sum(power), 1.0)
assert rate > 0 and math.isfinite(rate)

try:
    nb.GameInstance.from_rates([[1.0]], disagreement="sideways")
except ValueError:
    pass
else:
    raise AssertionError("bad disagreement accepted")

print("ok")
