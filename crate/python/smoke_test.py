"""Smoke test for the sbl_mimo extension module.

Build and install first, e.g.  maturin develop -m crates/python/Cargo.toml
then run  python python/smoke_test.py
"""

import cmath
import math

import sbl_mimo


def nmse(estimate, truth):
    err = sum(abs(a - b) ** 2 for a, b in zip(estimate, truth))
    return err / sum(abs(b) ** 2 for b in truth)


def check_dictionary():
    d = sbl_mimo.Dictionary.dft(8, 4, 2)
    assert d.structure == "diagonal", d.structure
    assert (d.num_coefficients, d.num_observations) == (16, 32)
    x = [complex(j % 3, -j) for j in range(16)]
    dense = d.dense()
    direct = [sum(row[j] * x[j] for j in range(16)) for row in dense]
    assert max(abs(a - b) for a, b in zip(d.apply(x), direct)) < 1e-10

    p = [[1, 0.5j, 0], [0.2, 1, -1j]]
    f = [[cmath.exp(0.3j * r * c) for c in range(3)] for r in range(4)]
    assert sbl_mimo.Dictionary(p, f).structure == "dense"


def check_recovery():
    d = sbl_mimo.Dictionary.dft(32, 8, 2)
    u = [0j] * d.num_coefficients
    u[5], u[40] = 1 - 0.5j, -0.3 + 0.8j
    z = d.apply(u)
    for run in (sbl_mimo.run_sbl, sbl_mimo.run_esbl, sbl_mimo.run_mesbl):
        r = run(d, z, 1e-8)
        assert r.converged, r
        assert nmse(r.u_hat, u) < 1e-4, (run.__name__, nmse(r.u_hat, u))


def check_monotone_trace():
    h, z, sigma2 = sbl_mimo.generate_trial(16, 8, 2, 5.0, seed=3)
    assert len(h) == 16 and len(h[0]) == 2
    assert math.isclose(sum(abs(v) ** 2 for row in h for v in row), 32.0, rel_tol=1e-9)
    d = sbl_mimo.Dictionary.dft(16, 8, 2)
    r = sbl_mimo.run_mesbl(d, z, sigma2, track_objective=True, max_iter=50)
    trace = r.objective_trace
    assert all(b >= a - 1e-9 for a, b in zip(trace, trace[1:]))
    ls = sbl_mimo.run_least_squares(d, z, sigma2)
    assert ls.iterations == 1


def check_sweep_and_errors():
    config = """
[scenario]
M = 16
N = 8
K = 2
snr_db = 0.0

[sweep]
variable = "snr_db"
values = [0.0, 10.0]
trials = 5
estimators = ["sbl", "mesbl"]
"""
    a = sbl_mimo.run_sweep(config, seed=4)
    assert a == sbl_mimo.run_sweep(config, seed=4)
    lines = a.strip().splitlines()
    assert lines[0].startswith("sweep_var,value,estimator") and len(lines) == 5
    try:
        sbl_mimo.run_sweep(config.replace("K = 2", "K = 9"))
    except ValueError as e:
        assert "pilot rows exceed pilot length" in str(e)
    else:
        raise AssertionError("invalid config accepted")


def main():
    check_dictionary()
    check_recovery()
    check_monotone_trace()
    check_sweep_and_errors()
    passed, checks = sbl_mimo.selftest()
    assert passed, checks
    print("sbl_mimo smoke test passed")


if __name__ == "__main__":
    main()
