"""Smoke test for the kgscatter extension module."""

import json
import math

import kgscatter


def close(a, b, tol):
    assert abs(a - b) <= tol, f"{a} vs {b} (tolerance {tol})"


def main():
    grid = kgscatter.Grid(30.0, 512)
    assert grid.n_points == 512
    xs = grid.x()
    close(xs[0], -30.0, 1e-12)

    u = [0.5 * math.exp(-x * x) for x in xs]
    field = kgscatter.Field(grid, u)
    close(field.mass(), 0.25 * math.sqrt(math.pi / 2.0), 1e-12)

    # free propagation and translation are L2 isometries
    close(field.propagate(3.0).mass(), field.mass(), 1e-12)
    close(field.translate(1.7).mass(), field.mass(), 1e-12)
    back = field.boost(0.3).boost(-0.3)
    assert back.max_abs_diff(field) < 1e-10

    q, residual = kgscatter.ground_state(kgscatter.Grid(40.0, 4096))
    assert residual < 1e-10, residual

    state = kgscatter.State(grid, u, [0.0] * len(u))
    e0 = state.energy("quintic_defocusing")
    traj = kgscatter.evolve(state, 1e-3, 1.0, "quintic_defocusing", snapshot_stride=100)
    assert traj.blowup_time is None
    last = traj.snapshot(len(traj) - 1)
    close(last.t, 1.0, 1e-9)
    close(last.energy("quintic_defocusing"), e0, 1e-6 * abs(e0))

    report = json.loads(kgscatter.run_identities(1))
    assert all(f["passed"] for f in report["flags"]), report["flags"]

    print(f"kgscatter {kgscatter.__version__}: smoke test passed")


if __name__ == "__main__":
    main()
