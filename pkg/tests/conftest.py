import numpy as np
import pytest

from stgnn.temporal_graph import Event, from_events


def random_stream(rng, n_nodes=20, n_events=300, mean_gap=0.1):
    """Random undirected contact stream with exponential inter-arrival."""
    events = []
    t = 0.0
    for _ in range(n_events):
        t += float(rng.exponential(mean_gap))
        u, v = rng.choice(n_nodes, size=2, replace=False)
        events.append(Event(int(u), int(v), t))
    return from_events(events, num_nodes=n_nodes)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_graph(rng):
    return random_stream(rng, n_nodes=12, n_events=120)
