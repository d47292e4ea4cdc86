import numpy as np
import pytest


@pytest.fixture(scope="session")
def corpus():
    """Seeded random planted support sets: (n, ell, k) small, varied shapes."""
    from mixrec.synth import PlantConfig, plant

    instances = []
    rng = np.random.default_rng(20240811)
    for trial in range(200):
        n = int(rng.integers(3, 13))
        ell = int(rng.integers(1, 5))
        k = int(rng.integers(1, min(n, 4) + 1))
        cfg = PlantConfig(
            n=n, k=k, ell=ell, model="md", seed=5000 + trial,
            allow_empty=(trial % 7 == 0),
        )
        instances.append(plant(cfg))
    return instances
