import numpy as np
import pytest

from mmnoma.interference import NetworkState


def random_network(rng, max_gnbs=3, max_beams=3, max_users=8, subband=False):
    """Random small network with every structural corner reachable."""
    J = int(rng.integers(1, max_gnbs + 1))
    K = int(rng.integers(1, max_beams + 1))
    U = int(rng.integers(1, max_users + 1))
    B = J * K
    beam_gnb = np.repeat(np.arange(J), K)
    beam_sub = np.tile(np.arange(K), J)
    gains = rng.exponential(1.0, (U, B)) * 10.0 ** rng.uniform(-3, 1, (U, B))
    power = rng.uniform(0.0, 1.0, B)
    power[rng.random(B) < 0.15] = 0.0
    serving = rng.integers(-1, B, U)
    beta = np.zeros(U)
    order = np.zeros(U, dtype=int)
    for b in range(B):
        m = np.flatnonzero(serving == b)
        if len(m):
            w = rng.random(len(m)) + 0.01
            beta[m] = w / w.sum()
            order[m] = rng.permutation(len(m)) + 1
    return NetworkState(
        gains=gains,
        beam_gnb=beam_gnb,
        beam_power=power,
        serving_beam=serving,
        beta=beta,
        order=order,
        noise=float(10.0 ** rng.uniform(-4, 0)),
        beam_subband=beam_sub,
        subband_matched=subband,
    )


def brute_force_links(st):
    """Per-user (signal, I1, I2) by explicit loops over users and beams."""
    U = len(st.serving_beam)
    out = []
    for u in range(U):
        b = st.serving_beam[u]
        if b < 0:
            out.append(None)
            continue
        j = st.beam_gnb[b]
        g = st.gains[u][b]
        signal = st.beam_power[b] * st.beta[u] * g
        i1 = 0.0
        for i in range(U):
            if i != u and st.serving_beam[i] == b and st.order[i] > st.order[u]:
                i1 += st.beam_power[b] * g * st.beta[i]
        i2 = 0.0
        for l in range(len(st.beam_gnb)):
            if st.beam_gnb[l] == j:
                continue
            if st.subband_matched and st.beam_subband[l] != st.beam_subband[b]:
                continue
            i2 += st.beam_power[l] * st.gains[u][l]
        out.append((signal, i1, i2))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
