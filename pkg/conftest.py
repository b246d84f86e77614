import os

import hypothesis
import numpy as np

np.seterr(all="warn")

hypothesis.settings.register_profile("ci", max_examples=50, deadline=None)
hypothesis.settings.register_profile("dev", max_examples=10, deadline=None)
hypothesis.settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "ci"))
