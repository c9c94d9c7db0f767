"""Smoke test for the sketchrank extension module.

Build and install first, e.g. ``maturin develop`` or
``pip install --no-build-isolation .`` from ``crates/python``.
"""

import math
import os
import tempfile

import numpy as np

import sketchrank as sr


def main() -> None:
    a = sr.make_test_matrix("gap-incoherent", 600, 500, seed=3)
    assert a.shape == (600, 500)

    rep = sr.estimate_rank(a, 1e-2, 210, seed=7)
    assert rep.r_hat == 100, rep
    assert rep.status == "converged"
    assert len(rep.sv_estimates) == 210
    assert rep.rounds[0][0] == 210

    rep = sr.estimate_rank(a, 1e-2, 50, seed=7)
    assert rep.status == "hit_cap" and rep.r_hat == 50

    rep = sr.estimate_rank(a, 1e-2, 50, seed=7, adaptive=True, sketch="gaussian")
    assert rep.r_hat == 100 and len(rep.rounds) > 1

    fe = sr.make_test_matrix("fe", 200, 200, seed=1)
    q, b, qrep = sr.fixed_precision_qb(fe, 1e-6, 10, seed=2)
    assert sr.qb_error(fe, q, b) <= 1e-6
    dense = np.array(fe.to_list())
    residual = dense - np.array(q.to_list()) @ np.array(b.to_list())
    assert np.linalg.norm(residual) <= 1e-6
    assert q.shape[1] >= qrep.r_hat

    m = sr.Matrix([[3.0, 0.0], [4.0, 5.0]])
    sv = m.singular_values()
    assert math.isclose(sv[0], math.sqrt(45)) and math.isclose(sv[1], math.sqrt(5))
    rng = np.random.default_rng(0)
    g = rng.standard_normal((40, 25))
    mg = sr.Matrix.from_col_major(40, 25, g.flatten(order="F").tolist())
    assert np.allclose(mg.singular_values(), np.linalg.svd(g, compute_uv=False), atol=1e-12)

    with tempfile.TemporaryDirectory() as d:
        for fmt in ("raw", "mtx", "mm-coordinate"):
            path = os.path.join(d, "m." + fmt)
            sr.write_matrix(path, mg, fmt)
            assert sr.read_matrix(path).col_major() == mg.col_major()
        try:
            sr.read_matrix(os.path.join(d, "missing"))
        except OSError:
            pass
        else:
            raise AssertionError("missing file should raise")

    assert np.allclose(sr.spectrum("fp", 3), [1.0, 0.125, 1.0 / 27.0], rtol=1e-15)
    assert sr.mp_expectation_bounds(400, 100) == (10.0, 30.0)
    lo, hi = sr.gauss_ratio_bounds(1, 100, 1000, 0.0)
    assert math.isclose(lo, 0.9) and math.isclose(hi, 2.0)
    assert math.isclose(sr.spiked_limit(2.0, 1.0, 1.0), 2.0 * math.sqrt(4.0 / 3.0))
    feasible, need = sr.srtt_required_samples(50, 4096, 0.3, 0.1)
    assert not feasible and abs(need - 219_900) / 219_900 < 1e-3

    for bad in (lambda: sr.estimate_rank(a, 0.0, 10),
                lambda: sr.estimate_rank(a, 1e-2, 10, sketch="nope"),
                lambda: sr.Matrix([[1.0], [1.0, 2.0]])):
        try:
            bad()
        except ValueError:
            pass
        else:
            raise AssertionError("expected ValueError")

    print("sketchrank", sr.__version__, "smoke test passed")


if __name__ == "__main__":
    main()
