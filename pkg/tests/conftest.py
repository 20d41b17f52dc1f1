import numpy as np
import pytest

from gyrocal.nn import ConvSpec, ModelConfig, PoolSpec

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def report_criterion():
    """Record one pass/fail line per acceptance criterion, then assert it."""

    def _report(number, passed, detail):
        ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {detail}")
        print(ACCEPTANCE_LINES[-1])
        assert passed, detail

    return _report


def conv2d_loops(x, k, b):
    """Direct quadruple-loop valid cross-correlation."""
    bs, cin, h, w = x.shape
    cout, _, n, m = k.shape
    out = np.zeros((bs, cout, h - n + 1, w - m + 1))
    for s in range(bs):
        for o in range(cout):
            for i in range(h - n + 1):
                for j in range(w - m + 1):
                    acc = b[o]
                    for c in range(cin):
                        for a in range(n):
                            for d in range(m):
                                acc += k[o, c, a, d] * x[s, c, i + a, j + d]
                    out[s, o, i, j] = acc
    return out


def avg_pool_loops(x, n, m):
    bs, c, h, w = x.shape
    out = np.zeros((bs, c, h // n, w // m))
    for s in range(bs):
        for ch in range(c):
            for i in range(h // n):
                for j in range(w // m):
                    out[s, ch, i, j] = x[s, ch, i * n:(i + 1) * n, j * m:(j + 1) * m].mean()
    return out


def central_difference(f, param, step=1e-5):
    grad = np.zeros_like(param.data)
    for idx in np.ndindex(param.shape):
        old = param.data[idx]
        param.data[idx] = old + step
        up = f()
        param.data[idx] = old - step
        down = f()
        param.data[idx] = old
        grad[idx] = (up - down) / (2 * step)
    return grad


@pytest.fixture
def tiny_config():
    """W=12 model with 2 channels per conv, small enough for finite differences."""
    return ModelConfig(window_len=12, head_conv=ConvSpec(2, 3, 2), combined_conv=ConvSpec(2, 2, 2),
                       pool=PoolSpec(1, 2), fc_hidden=4, dropout_p=0.2)
