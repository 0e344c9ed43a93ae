import numpy as np
import pytest

from thzicl import phantom, spectra
from thzicl.volume_io import Domain, ThzVolume, VolumeHeader


def make_volume(data, domain=Domain.RAW):
    data = np.asarray(data)
    nf, nx, ny = data.shape
    return ThzVolume(VolumeHeader(nf=nf, nx=nx, ny=ny, domain=domain), data)


@pytest.fixture(scope="session")
def default_spec():
    return phantom.PhantomSpec()


@pytest.fixture(scope="session")
def default_phantom(default_spec):
    return phantom.generate_phantom(default_spec)


@pytest.fixture(scope="session")
def transformed_phantom(default_phantom):
    vol, _ = default_phantom
    return spectra.transform_volume(vol)
