import os
import sys

# THREADS also caps the BLAS pools, which read these variables at import time
if os.environ.get("THREADS"):
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, os.environ["THREADS"])

from normsol.cli import main  # noqa: E402

sys.exit(main())
