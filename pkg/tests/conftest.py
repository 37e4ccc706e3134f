import numpy as np
import pytest

from gridrobust.grid import Chronics, grid_from_dict, load_grid


def small_grid(lines, gens, loads, buses=None, slack=1):
    buses = buses or sorted({b for ln in lines for b in ln[:2]})
    return grid_from_dict(
        {
            "buses": buses,
            "lines": [{"from": a, "to": b, "reactance": x, "limit": lim} for a, b, x, lim in lines],
            "generators": [{"bus": b, "p_max": p} for b, p in gens],
            "loads": [{"bus": b, "base": d} for b, d in loads],
            "slack": slack,
        }
    )


@pytest.fixture(scope="session")
def ieee14():
    return load_grid("ieee14")


@pytest.fixture
def two_bus():
    return small_grid([(1, 2, 0.1, 10.0)], [(1, 10.0)], [(2, 1.0)])


@pytest.fixture
def triangle():
    """Equal-reactance 3-bus ring; slack generator on bus 1, load on bus 2."""
    return small_grid(
        [(1, 2, 0.1, 10.0), (1, 3, 0.1, 10.0), (3, 2, 0.1, 10.0)],
        [(1, 10.0)],
        [(2, 1.0)],
    )


def flat_chronics(model, steps, load, gen=None):
    load = np.tile(np.asarray(load, dtype=float), (steps, 1))
    gen = np.tile(np.asarray(gen if gen is not None else [0.0] * model.n_gens, dtype=float), (steps, 1))
    return Chronics(load=load, gen=gen)
