import os

# Single-threaded BLAS: faster at this repo's matrix sizes and required so the
# two-process learning checks scale cleanly on two cores. Must be set before
# numpy is imported anywhere in the test session.
for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(var, "1")

from hypothesis import settings

# the whole repo is deterministic given its seeds; keep the suite that way too
settings.register_profile("deterministic", derandomize=True)
settings.load_profile("deterministic")
