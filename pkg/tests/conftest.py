import numpy as np
import pytest

from vpmerge import (
    NoiseSchedule,
    SeedPolicy,
    SyntheticSpec,
    partition_by_label,
    synth_gaussian_mixture,
    sweep,
)


@pytest.fixture(scope="session")
def ddpm():
    return NoiseSchedule.ddpm_default()


def two_class_dataset(seed, n_per_class=20000, d=16, lam_a=10.0, lam_b=4.0):
    """Two zero-mean Gaussian classes with leading eigenvalues lam_a, lam_b."""
    spec_a = np.r_[lam_a, np.ones(d - 1)]
    spec_b = np.r_[lam_b, np.ones(d - 1)]
    spec = SyntheticSpec(
        means=np.zeros((2, d)),
        spectra=np.vstack([spec_a, spec_b]),
        samples_per_class=(n_per_class, n_per_class),
    )
    return synth_gaussian_mixture(spec, seed=seed)


@pytest.fixture(scope="session")
def two_class_sweep(ddpm):
    ds = two_class_dataset(seed=0)
    sw = sweep(ds, ddpm, range(0, 1001, 10), SeedPolicy(base_seed=1))
    return sw, partition_by_label(ds)
