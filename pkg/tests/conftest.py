import numpy as np
import pytest

from tdfix.restcn import ResTCNConfig


def ntu_body_lines(joints, info="72057594037931101 0 1 1 1 1 0 0.02 -0.25 2"):
    """One NTU body block: info line, joint count, 25 joint lines of 12 numbers."""
    lines = [info, str(len(joints))]
    for x, y, z in joints:
        lines.append(f"{x} {y} {z} 200.1 150.2 900.3 500.4 0.1 0.2 0.3 0.4 2")
    return lines


def ntu_text(frames):
    """``frames`` is a list of frames, each a list of bodies (25 xyz triples)."""
    lines = [str(len(frames))]
    for bodies in frames:
        lines.append(str(len(bodies)))
        for joints in bodies:
            lines += ntu_body_lines(joints)
    return "\n".join(lines) + "\n"


@pytest.fixture
def tiny_cfg():
    return ResTCNConfig(input_dim=4, num_classes=3, block_channels=(2, 3, 4), first_filter_len=4,
                        unit_filter_len=4, dropout=0.5)


@pytest.fixture
def small_cfg():
    return ResTCNConfig(input_dim=48, num_classes=4, block_channels=(8, 16, 32))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def toy_dataset(x, y, num_classes):
    from tdfix.dataio import SYNTH_LAYOUT, Dataset, MeanSkeleton

    return Dataset(np.asarray(x, float), np.asarray(y), [f"s{i}" for i in range(len(y))], num_classes,
                   SYNTH_LAYOUT, MeanSkeleton.zeros(np.shape(x)[-1]))


def separable_toy(n_per_class=40, T=16, D=4, seed=0):
    """Two classes that differ by the sign of a constant offset on dim 0."""
    r = np.random.default_rng(seed)
    y = np.repeat([0, 1], n_per_class)
    x = r.normal(0, 0.3, size=(len(y), T, D))
    x[:, :, 0] += np.where(y == 0, 1.0, -1.0)[:, None]
    return toy_dataset(x, y, 2)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
