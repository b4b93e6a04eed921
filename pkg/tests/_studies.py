"""Cached Monte Carlo studies shared by the acceptance and invariant tests."""
from functools import lru_cache

from scoregof.bootstrap import MOutOfN, Parametric
from scoregof.harness import StudyConfig, run_size_study
from scoregof.model import GaussianCopula, GaussianLocationScale, Independence, SimpleNull
from scoregof.stats import StatisticSpec

# null model -> flagship statistics
FLAGSHIPS = {
    "simple": (SimpleNull("uniform"), ("ks", "cvm")),
    "gaussian": (GaussianLocationScale(), ("mixture-sup",)),
    "independence": (Independence(), ("kw",)),
    "copula": (GaussianCopula(0.5), ("normal-scores",)),
}
SIZE_SEED = 20250101


@lru_cache(maxsize=None)
def size_study(null_name, stat_name, scheme_name, n=100, B=199, R=2000, alpha=0.05):
    null, _ = FLAGSHIPS[null_name]
    scheme = Parametric(B) if scheme_name == "parametric" else MOutOfN(B)
    cfg = StudyConfig(null, StatisticSpec(stat_name), scheme, n=n, R=R, alpha=alpha, seed=SIZE_SEED)
    return run_size_study(cfg)

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES = []


def record(criterion, passed, detail):
    line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'} -- {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed
