"""Smoke test for the pyfrontspeed extension.

Build and install first:  pip install maturin && maturin develop -m crates/py/Cargo.toml
"""

import math

import pyfrontspeed as fs


def close(a, b, tol):
    assert abs(a - b) <= tol, f"{a} vs {b}"


def main():
    hr = fs.Family.builtin("hadeler_rothe")
    cgm = fs.Family.builtin("cgm_sine")

    close(hr.linear_speed(4.0), 2.0, 1e-12)
    close(hr.nonlinear_speed(4.0), 3.0 / math.sqrt(2.0), 1e-12)
    close(fs.minimal_speed(hr, 4.0)["c_min"], 3.0 / math.sqrt(2.0), 1e-4)
    close(fs.minimal_speed(cgm, 0.2)["c_min"], math.sqrt(1.6), 1e-3)

    report = fs.speeds_at(hr, 4.0)
    assert report["regime"] == "pushed", report["regime"]
    assert report["certificate"]["certified"]

    table = fs.sweep(cgm, [0.1 * k for k in range(1, 10)], refine=True)
    close(table["exchange"]["refined"], 0.5, 0.02)

    c, z, u = fs.profile(hr, 4.0, nodes=500)
    assert len(z) == len(u) >= 500 and u[0] > u[-1]

    custom = fs.Family.custom("u*(1-u)", "1 + beta/2", "beta/2")
    close(fs.hr_bound(custom, 1.0)["value"], 2.0, 1e-12)

    try:
        fs.minimal_speed(hr, -2.0)
    except fs.FrontspeedError:
        pass
    else:
        raise AssertionError("invalid β accepted")
    try:
        fs.Family.builtin("nope")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown builtin accepted")

    print("smoke test ok")


if __name__ == "__main__":
    main()
