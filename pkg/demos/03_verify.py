from mutualism import classify_regime, constant_model, run_ensemble, verify_regime

# ### Checking a prediction by simulation
#
# The theorems speak about t -> infinity.  An ensemble at horizon T stands in
# for that limit: log-slopes, time averages and a late window of checkpoints,
# each compared with its prediction up to three standard errors.

m = constant_model(a1=0.6, c=0.5, sigma=0.4)
report = classify_regime(m)
stats = run_ensemble(m, horizon=100.0, n_steps=10_000, n_paths=200, seed=0, n_workers=4)
verdict = verify_regime(m, report, stats)
print(verdict.table())
print("passed:", verdict.passed)

# Statistics are reduced in path order, so the thread count has no effect on
# the numbers.

again = run_ensemble(m, horizon=100.0, n_steps=10_000, n_paths=200, seed=0, n_workers=1)
print("identical with one thread:", (again.terminal == stats.terminal).all())

# A report for a different model is refused rather than silently compared.

try:
    verify_regime(m, classify_regime(constant_model(a1=0.1, sigma=1.0)), stats)
except ValueError as exc:
    print(type(exc).__name__, exc)
