"""Brute-force reference optimum for the two-UAV, single-user micro instance.

Stand-alone on purpose: only numpy, no imports from the package. The instance
(geometry, fading draws, physical constants) is fixed here and written to
``tests/data/micro_instance.json`` together with the grid optimum, so the test
suite can rebuild the same instance through the package API and compare.

With one user and one single-antenna UAV per link the minimum-power beamformers
have closed forms:

* data link of the serving UAV l:  p = G_min * sigma^2 * d^a / (A |g|^2)
* fronthaul to l (MRT at the BS):  p = (2^R - 1) * sigma^2 * dF^aF / (AF |g_tx|^2 |g_rx|^2)
* the idle UAV needs no fronthaul (its rate requirement is zero).

Letting both UAVs serve the user is never cheaper: the received signal power is
additive across UAVs, so shifting all data power onto the better link is at
least as good, and the second UAV would additionally need a fronthaul stream.
Hence only the two single-server assignments are enumerated.

Run:  python scripts/micro_grid_oracle.py
"""

import json
from pathlib import Path

import numpy as np

GRID = 21
OUT = Path(__file__).resolve().parents[1] / "tests" / "data" / "micro_instance.json"


def dbm_to_w(dbm):
    return 10.0 ** ((dbm - 30.0) / 10.0)


def build_instance():
    rng = np.random.default_rng(20240611)
    params = {
        "bandwidth_hz": 2e6,
        "slot_duration_s": 0.2,
        "num_slots": 1,
        "num_blocks": 1,
        "num_uavs": 2,
        "num_users": 1,
        "bs_antennas": 2,
        "uav_antennas": 1,
        "p_bs_max": dbm_to_w(46.0),
        "p_uav_max": dbm_to_w(40.0),
        "nav_c1": dbm_to_w(0.0),
        "nav_c2": dbm_to_w(20.0),
        "noise_psd": dbm_to_w(-174.0),
        "max_speed": 10.0,
        "r_min_bps": 0.8e6,
        "d_min": 10.0,
        "rice_factor": 10.0 ** -0.3,
        "pathloss_exponent_data": 2.5,
        "pathloss_exponent_fh": 2.0,
        "antenna_gain_data": 1e-3,
        "antenna_gain_fh": 1e-3,
        "beta": 1e4 / dbm_to_w(40.0),
        "alpha_0": 1.0 / 3.0,
        "alpha_uav": [1.0 / 3.0, 1.0 / 3.0],
    }
    geometry = {
        "bs_position": [0.0, 0.0, 25.0],
        "user_positions": [[640.0, 210.0, 0.0]],
        "uav_start_positions": [[420.0, 150.0, 75.0], [520.0, -260.0, 60.0]],
        "nav_min": [-1000.0, -1000.0, 50.0],
        "nav_max": [1000.0, 1000.0, 100.0],
        "ring_inner": 500.0,
        "ring_outer": 1000.0,
        "height_min": 50.0,
        "height_max": 100.0,
    }

    def cplx(n):
        return rng.standard_normal(n) + 1j * rng.standard_normal(n)

    # Fading values are arbitrary fixed draws; only their magnitudes matter here.
    g_data = [[cplx(1) / np.sqrt(2.0)] for _ in range(2)]
    g_tx = [np.exp(1j * rng.uniform(0, 2 * np.pi, 2)) for _ in range(2)]
    g_rx = [np.exp(1j * rng.uniform(0, 2 * np.pi, 1)) for _ in range(2)]
    channels = {
        "g_data": [[[[z.real, z.imag] for z in g_data[l][0]]] for l in range(2)],
        "g_fh_tx": [[[z.real, z.imag] for z in g_tx[l]] for l in range(2)],
        "g_fh_rx": [[[z.real, z.imag] for z in g_rx[l]] for l in range(2)],
    }
    return params, geometry, channels, g_data, g_tx, g_rx


def candidate_points(start, dmax, lo, hi):
    axes = [np.linspace(start[i] - dmax, start[i] + dmax, GRID) for i in range(3)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    ok = np.all(pts >= lo, axis=1) & np.all(pts <= hi, axis=1)
    ok &= np.linalg.norm(pts - start, axis=1) <= dmax + 1e-12
    return pts[ok]


def main():
    params, geometry, channels, g_data, g_tx, g_rx = build_instance()
    sigma2 = params["noise_psd"] * params["bandwidth_hz"]
    r = params["r_min_bps"] / params["bandwidth_hz"]
    gamma_min = 2.0 ** (2.0 * r) - 1.0
    gamma_fh = 2.0 ** r - 1.0
    dmax = params["max_speed"] * params["slot_duration_s"]
    lo = np.array(geometry["nav_min"])
    hi = np.array(geometry["nav_max"])
    user = np.array(geometry["user_positions"][0])
    bs = np.array(geometry["bs_position"])
    c1, c2 = params["nav_c1"], params["nav_c2"]
    a0 = params["alpha_0"]
    au = params["alpha_uav"]

    grids, serve, idle = [], [], []
    for l in range(2):
        start = np.array(geometry["uav_start_positions"][l])
        pts = candidate_points(start, dmax, lo, hi)
        step = np.linalg.norm(pts - start, axis=1)
        nav = c1 + c2 * step
        d = np.linalg.norm(pts - user, axis=1)
        dF = np.linalg.norm(pts - bs, axis=1)
        p_data = gamma_min * sigma2 * d ** params["pathloss_exponent_data"] / (
            params["antenna_gain_data"] * abs(g_data[l][0][0]) ** 2
        )
        gain_fh = np.linalg.norm(g_tx[l]) ** 2 * np.linalg.norm(g_rx[l]) ** 2
        p_fh = gamma_fh * sigma2 * dF ** params["pathloss_exponent_fh"] / (
            params["antenna_gain_fh"] * gain_fh
        )
        feasible = p_data + nav <= params["p_uav_max"]
        cost_serve = np.where(feasible, au[l] * (p_data + nav) + a0 * p_fh, np.inf)
        grids.append(pts)
        serve.append(cost_serve)
        idle.append(au[l] * nav)

    best = np.inf
    best_pair = None
    for server in range(2):
        other = 1 - server
        ps, po = grids[server], grids[other]
        for i0 in range(0, len(ps), 512):
            chunk = ps[i0:i0 + 512]
            sep = np.linalg.norm(chunk[:, None, :] - po[None, :, :], axis=2)
            tot = serve[server][i0:i0 + 512, None] + idle[other][None, :]
            tot = np.where(sep >= params["d_min"], tot, np.inf)
            idx = np.unravel_index(np.argmin(tot), tot.shape)
            if tot[idx] < best:
                best = float(tot[idx])
                best_pair = (server, chunk[idx[0]].tolist(), po[idx[1]].tolist())

    out = {
        "params": params,
        "geometry": geometry,
        "seed": 0,
        "channels": channels,
        "grid_points_per_axis": GRID,
        "grid_optimum_weighted_total_w": best,
        "grid_optimum_server": best_pair[0],
        "grid_optimum_positions": {"server": best_pair[1], "idle": best_pair[2]},
    }
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(out, indent=2) + "\n")
    print(f"grid optimum {best:.12e} W (server UAV {best_pair[0]})")


if __name__ == "__main__":
    main()
