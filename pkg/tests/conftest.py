from __future__ import annotations

import pytest

from optosqueeze import effective, model


@pytest.fixture(scope="session")
def fig2():
    return model.preset("fig2_high_kappa")


@pytest.fixture(scope="session")
def fig4():
    return model.preset("fig4_low_kappa")


@pytest.fixture(scope="session")
def fig2_pipeline(fig2):
    return effective.run_pipeline(fig2)


@pytest.fixture(scope="session")
def fig4_pipeline(fig4):
    return effective.run_pipeline(fig4)


@pytest.fixture(scope="session")
def fig2_optimum(fig2):
    return effective.optimal_point(fig2)


@pytest.fixture(scope="session")
def fig4_optimum(fig4):
    return effective.optimal_point(fig4)
