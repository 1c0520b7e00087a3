import numpy as np
import pytest

from thermotopo import MaterialPair, ThermalBC, build_grid


def gauss_l2_error(mesh, T, exact, order=3):
    """L2 norm of (bilinear interpolant of T) - exact, by tensor Gauss-Legendre."""
    pts, wts = np.polynomial.legendre.leggauss(order)
    err2 = 0.0
    for j in range(mesh.ny):
        for i in range(mesh.nx):
            x0, y0 = i * mesh.hx, j * mesh.hy
            n00 = j * (mesh.nx + 1) + i
            c = T[[n00, n00 + 1, n00 + mesh.nx + 2, n00 + mesh.nx + 1]]
            for a, wa in zip(pts, wts):
                for b, wb in zip(pts, wts):
                    s, t = 0.5 * (a + 1), 0.5 * (b + 1)
                    th = c[0] * (1 - s) * (1 - t) + c[1] * s * (1 - t) + c[2] * s * t + c[3] * (1 - s) * t
                    x, y = x0 + s * mesh.hx, y0 + t * mesh.hy
                    err2 += wa * wb * 0.25 * mesh.hx * mesh.hy * (th - exact(x, y)) ** 2
    return np.sqrt(err2)


@pytest.fixture
def water_steel():
    return MaterialPair()


@pytest.fixture
def mesh16():
    return build_grid(16, 16, 8.0, 8.0)


@pytest.fixture
def default_bc():
    return ThermalBC()


_ACCEPTANCE = []


@pytest.fixture
def report():
    def add(line):
        _ACCEPTANCE.append(line)
        print(line)
    return add


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
