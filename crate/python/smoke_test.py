"""Smoke test for the Python extension.

Build and install it first:
    pip install --no-build-isolation -e crates/py
"""

import cmath
import json
import math

import couette


def main():
    params = couette.FlowParams(1.4, 0.01, 1.0)
    assert params.M == 1.0 and params.s == 1.5
    try:
        couette.FlowParams(1.4, 2.0, 1.0)
    except ValueError as e:
        print("rejected nu = 2:", e)
    else:
        raise AssertionError("nu = 2 accepted")

    grid = couette.GridSpec(2, 4.0, 0.5)
    assert len(grid) == 5 * 17
    assert grid.points()[0] == (-2, -4.0)

    assert couette.p_symbol(0.0, 1, 0.0) == 1.0
    assert couette.dt_p_symbol(1.0, 1, 0.0) == 2.0
    m = couette.ghost_multiplier(50.0, 1, 3.0, 0.01)
    assert math.exp(-math.pi) < m <= 1.0
    assert abs(couette.gronwall_factor(1e12, 1, 0.0) - math.pi / 2) < 1e-9

    d = couette.rhs_full(1, 0.0, (1 + 0j, 0j, 0j, 0j), 0.0, params)
    assert d[1] == complex(1 / 1.4, 0.0), d
    phi_dot, a_dot = couette.rhs_reduced(1, 0.0, 1 + 0j, 0j, 0.0, params)
    assert phi_dot == 0 and abs(a_dot - 3.0) < 1e-15

    lp, lm = couette.damped_wave_roots(1.0, 0.01, 1.0)
    assert abs(lp * lp + 0.01 * lp + 1.0) < 1e-12
    alpha = couette.damped_wave_alpha(1.0, 0.0, 1.0, 1 + 0j, 0j, math.pi)
    assert abs(alpha + 1) < 1e-12

    ratio = couette.coercivity_ratio(2, 3.0, 0.4 + 0.1j, -0.2j, 1.5, params)
    assert 0.25 <= ratio <= 4.0
    assert couette.mode_energy(2, 3.0, 0.4 + 0.1j, -0.2j, 1.5, params) > 0

    ts = [1.0 + i for i in range(50)]
    vs = [math.sqrt(1 + t * t) ** -1.5 for t in ts]
    fit = couette.power_law_slope(ts, vs, (1.0, 50.0))
    assert abs(fit["exponent_or_rate"] + 1.5) < 1e-9 and fit["n_points"] == 50

    config = json.dumps({
        "gamma": 1.4, "nu": 0.01, "M": 1.0, "t_end": 5.0,
        "grid": {"K": 2, "eta_max": 4.0, "delta_eta": 0.5},
    })
    full = json.loads(couette.parse_config(config))
    assert full["safety"] == 0.1 and full["system"] == "reduced"
    out = couette.simulate(config, threads=1)
    assert len(out["t"]) == 11 and out["t"][-1] == 5.0
    assert max(out["conserved_r2_max"]) < 1e-12
    manifest = json.loads(out["manifest"])
    print("simulated", manifest["lattice_points"], "lattice points in",
          f"{manifest['wall_time_s']:.3f}s; norm_Pvx",
          f"{out['norm_Pvx'][0]:.3e} -> {out['norm_Pvx'][-1]:.3e}")

    rows = json.loads(couette.audit_symbols(json.dumps(
        {"t_max": 10, "n_t": 11, "k_max": 2, "eta_max": 4, "delta_eta": 1, "nus": [0.01]})))
    assert all(r["min_margin"] >= 0 for r in rows)
    assert cmath.isfinite(couette.rhs_reduced(1, 2.0, 1j, 1j, 3.0, params, forcing=0.5)[1])
    print("smoke test passed")


if __name__ == "__main__":
    main()
