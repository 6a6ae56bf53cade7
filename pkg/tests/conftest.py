import pytest

from nqlab.services.bounds_service import BoundsService
from nqlab.services.estimates_service import EstimatesService
from nqlab.services.fourier_service import FourierService
from nqlab.services.hypothesis_service import HypothesisService
from nqlab.services.kernel_service import KernelService
from nqlab.services.transform_service import TransformService


@pytest.fixture
def kernel_service():
    return KernelService()


@pytest.fixture
def transform_service():
    return TransformService()


@pytest.fixture
def fourier_service():
    return FourierService()


@pytest.fixture
def hypothesis_service():
    return HypothesisService()


@pytest.fixture
def estimates_service():
    return EstimatesService()


@pytest.fixture
def bounds_service():
    return BoundsService()


@pytest.fixture
def constant_kernel(kernel_service):
    return kernel_service.make_cesaro_kernel(0.0, 1.0)


@pytest.fixture
def sqrt_kernel(kernel_service):
    return kernel_service.make_cesaro_kernel(1.0, 0.5)


@pytest.fixture
def smooth_kernel(kernel_service):
    return kernel_service.make_cesaro_kernel(2.5, 0.4)
