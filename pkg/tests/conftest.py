import pytest

from contend.io import load_scenario
from contend.valuation import BeliefTable

MATRIX_M = {
    "App1": {"R1": 1.9, "R2": 1.7, "R3": 1.5, "R4": 1.0, "R5": 0.9},
    "App2": {"R1": 1.6, "R2": 1.3, "R3": 1.1, "R4": 0.8, "R5": 0.7},
    "App3": {"R1": 1.4, "R2": 1.0, "R3": 0.6, "R4": 0.5, "R5": 0.4},
    "App4": {"R1": 0.3, "R2": 0.6, "R3": 0.9, "R4": 1.2, "R5": 1.4},
    "App5": {"R1": 0.7, "R2": 0.8, "R3": 1.1, "R4": 1.4, "R5": 1.7},
}


@pytest.fixture(scope="session")
def matrix_m():
    return load_scenario("matrix_m")


@pytest.fixture(scope="session")
def matrix_beliefs(matrix_m):
    return BeliefTable.from_matrix(MATRIX_M, matrix_m.resource_ids)


@pytest.fixture(scope="session")
def hmmer_mcf():
    return load_scenario("hmmer_mcf")
