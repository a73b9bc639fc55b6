import os

# BLAS oversubscription is a large slowdown on small hosts; pin before numpy
# loads (and again via threadpoolctl in case a plugin already imported it).
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")
try:
    import threadpoolctl

    threadpoolctl.threadpool_limits(1)
except Exception:
    pass

import numpy as np
import pytest

import seriesmps as sm


@pytest.fixture(scope="session")
def tiny_bundle():
    """Small trained generative model shared by imputer/sampler/analysis tests."""
    data = sm.generate_nts(
        sm.NTSParams(
            n_instances=60,
            length=12,
            tau_choices=(6.0,),
            m_choices=(1.0,),
            sigma=0.05,
            seed=7,
        )
    )
    config = sm.TrainConfig(eta=0.1, chi_max=12, d=6, n_sweeps=4, seed=3)
    bundle, _ = sm.fit(data.values, config)
    return bundle


@pytest.fixture(scope="session")
def tiny_data():
    return sm.generate_nts(
        sm.NTSParams(
            n_instances=60,
            length=12,
            tau_choices=(6.0,),
            m_choices=(1.0,),
            sigma=0.05,
            seed=7,
        )
    )


def identity_preprocessor():
    """Preprocessor whose apply/invert are the identity on [-1, 1]."""
    return sm.Preprocessor(kind="min-max", median=0.0, iqr=0.0, x_min=-1.0, x_max=1.0)


@pytest.fixture
def ident_pre():
    return identity_preprocessor()


def random_generative_mps(n_sites, d, chi, seed):
    """Random normalized single-class MPS."""
    return sm.random_init(n_sites, d, chi, n_labels=1, seed=seed)


def bundle_from_mps(mps, grid_size=512):
    """Wrap a bare MPS with an identity preprocessor for direct-domain tests."""
    return sm.ModelBundle(
        mps=mps,
        preprocessor=identity_preprocessor(),
        feature_map=sm.feature_map(mps.d, grid_size),
        train_config=sm.TrainConfig(d=mps.d),
    )
