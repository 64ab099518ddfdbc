"""Quick check of the Python bindings. Run from the repository root after
`pip install --no-build-isolation ./crates/python`."""

import math
import sys
import tempfile
from pathlib import Path

import ccmsim

ROOT = Path(__file__).resolve().parent.parent
CONFIGS = ROOT / "fixtures" / "configs"


def main():
    assert abs(ccmsim.series_flux(1.0) - 2.0 * math.exp(-math.pi**2 / 4.0)) < 1e-6
    assert ccmsim.series_flux(0.0) is None

    times, flux, ref, err = ccmsim.verify_cbf(0.25, 0.1, 5)
    assert len(times) == 5 and err[-1] < 0.05

    errors, slips = ccmsim.verify_meshupdate(0.2, 0.0)
    assert slips == 0 and max(errors) < 1e-12

    ramp = CONFIGS / "ramp_1kw.ini"
    u_eq = ccmsim.equilibrium_velocity(ramp)
    u0, stalled = ccmsim.transient_velocity(ramp, 0.0)
    assert u0 > u_eq > 0.0 and not stalled

    try:
        ccmsim.check_config(ramp, {"time.nsteps": "3"})
    except ValueError as e:
        assert "time.nsteps" in str(e)
    else:
        raise AssertionError("unknown key accepted")

    with tempfile.TemporaryDirectory() as out:
        overrides = {
            "time.n_steps": "3",
            "output.vtk_every": "0",
            "mesh.path": str(ROOT / "fixtures" / "meshes" / "probe_coarse.mesh"),
        }
        result = ccmsim.run(ramp, out=out, overrides=overrides)
        assert len(result) == 3
        assert result.final_displacement > 0.0
        assert (Path(out) / "run.csv").read_text().count("\n") == 4
        print(result)

    print("smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
