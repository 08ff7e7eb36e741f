import numpy as np
import pytest

from relayfbl import _kernels
from relayfbl._kernels import _pykernels as py

needs_ext = pytest.mark.skipif(_kernels.compiled is None, reason="compiled kernels not built")


def test_backend_reported():
    assert _kernels.BACKEND in ("cython", "python")
    assert (_kernels.BACKEND == "cython") == (_kernels.compiled is not None)


@pytest.fixture
def data():
    rng = np.random.default_rng(0)
    return {
        "raw": rng.integers(0, 2**63, size=2000, dtype=np.uint64) * np.uint64(2) + np.uint64(1),
        "bank": rng.standard_normal((50, 40)),
        "resid": rng.standard_normal(40),
        "z": rng.standard_normal((30, 8)),
        "x": rng.standard_normal((30, 8)),
    }


def test_sq_dist_rows_reference(data):
    b, r = data["bank"], data["resid"]
    expect = np.array([np.sum((r - 0.7 * row) ** 2) for row in b])
    np.testing.assert_allclose(_kernels.sq_dist_rows(b, r, 0.7), expect, rtol=1e-13)


def test_mgf_exponents_reference(data):
    z, x, t, P = data["z"], data["x"], 0.1, 2.0
    expect = [t * np.sum(-P * zi ** 2 + 2 * xi * zi + P) + 2 * t * t / (1 + 2 * t * P)
              * (z.shape[1] * P - np.sum(xi ** 2)) for zi, xi in zip(z, x)]
    np.testing.assert_allclose(_kernels.mgf_exponents(z, x, t, P), expect, rtol=1e-12, atol=1e-12)


def test_box_muller_known_pair():
    # u0 = 1 - 0 = 1 gives radius 0; u0 = 1 - 1/2 gives radius sqrt(2 ln 2) at angle pi.
    raw = np.array([0, 0, 1 << 63, 1 << 63], dtype=np.uint64)
    out = _kernels.box_muller(raw)
    np.testing.assert_allclose(out, [0, 0, -np.sqrt(2 * np.log(2)), 0], atol=1e-15)


def test_box_muller_odd_length_rejected():
    with pytest.raises(ValueError):
        _kernels.box_muller(np.zeros(3, dtype=np.uint64))


@needs_ext
@pytest.mark.parametrize("name", ["box_muller", "sq_dist_rows", "mgf_exponents"])
def test_backends_agree(name, data):
    args = {"box_muller": (data["raw"],), "sq_dist_rows": (data["bank"], data["resid"], 1.3),
            "mgf_exponents": (data["z"], data["x"], 0.2, 1.0)}[name]
    np.testing.assert_allclose(getattr(_kernels.compiled, name)(*args), getattr(py, name)(*args),
                               rtol=1e-12, atol=1e-12)


@needs_ext
def test_compiled_shape_checks():
    with pytest.raises(ValueError):
        _kernels.compiled.sq_dist_rows(np.zeros((2, 3)), np.zeros(4), 1.0)
    with pytest.raises(ValueError):
        _kernels.compiled.mgf_exponents(np.zeros((2, 3)), np.zeros((2, 4)), 0.1, 1.0)


def test_fallback_selected_by_env(tmp_path):
    import subprocess
    import sys
    out = subprocess.run([sys.executable, "-c", "import relayfbl; print(relayfbl.BACKEND)"],
                         env={"RELAYFBL_NO_EXT": "1", "PATH": ""}, capture_output=True, text=True,
                         check=True)
    assert out.stdout.strip() == "python"
