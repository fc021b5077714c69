"""Smoke test for the Python bindings.

Build first with `cargo build -p switchsde-py --release` (or set
SWITCHSDE_PY_LIB to the shared library), then run `python3 python/smoke_test.py`.
"""

import importlib.util
import math
import os
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def find_library():
    if "SWITCHSDE_PY_LIB" in os.environ:
        return Path(os.environ["SWITCHSDE_PY_LIB"])
    names = ["libswitchsde_py.so", "libswitchsde_py.dylib", "switchsde_py.dll"]
    for profile in ("release", "debug"):
        for name in names:
            candidate = ROOT / "target" / profile / name
            if candidate.exists():
                return candidate
    sys.exit("switchsde_py library not found; run `cargo build -p switchsde-py --release`")


def load():
    lib = find_library()
    suffix = ".pyd" if lib.suffix == ".dll" else ".so"
    target = Path(tempfile.mkdtemp()) / f"switchsde_py{suffix}"
    shutil.copy(lib, target)
    spec = importlib.util.spec_from_file_location("switchsde_py", target)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def main():
    sp = load()

    chattering = sp.Spec.preset("example-3.7")
    verdict, curve = sp.solve_moment(chattering)
    assert verdict == "verdict=NO_SOLUTION t=0 case=A", verdict
    assert sp.check_nonexistence(chattering) == verdict

    verdict, curve = sp.solve_moment(sp.Spec.preset("example-3.8"), horizon=1.0)
    assert verdict == "verdict=SOLVED_TO t=1 case=-", verdict
    assert abs(curve["crossings"][0][0] - (math.sqrt(2) - 1)) < 1e-12

    times = sp.crossing_times_closed_form(1.0, 0.5, 3)
    assert abs(times[0] - 0.5 * math.log(1.5)) < 1e-15
    report = sp.construct_lifetime(sp.Spec.preset("example-2.6"), n_max=3)
    assert all(abs(a - b) < 1e-9 for a, b in zip(report["crossing_times"], times))
    assert report["verdict"] == "FINITE_LIFETIME_SUSPECTED"

    assert sp.classify_series("closed-form", alpha=0.5)[0] == "DIVERGES"
    assert sp.classify_series("closed-form", alpha=1.0)[0] == "CONVERGES"
    assert sp.classify_series("growth", thresholds="(k!)^k")[0] == "DIVERGES"

    sim = sp.simulate(sp.Spec.preset("example-2.3"), n=20000, dt=1e-2, horizon=0.5, seed=3)
    g, se = sim["g"][-1], sim["stderr"][-1]
    assert abs(g - 1.5) < 4 * se, (g, se)

    m_numeric, m_formula = sp.oscillation_m(0.3)
    assert abs(m_numeric - m_formula) < 1e-6

    assert sp.wasserstein_1d([1.0, 3.0], [2.0, 4.0], 1.0) == 1.0
    assert abs(sp.wasserstein_to_dirac([[0.0], [2.0]], [0.0], 2.0) - math.sqrt(2)) < 1e-15

    try:
        sp.solve_moment(sp.Spec.preset("example-2.6"))
    except NotImplementedError:
        pass
    else:
        raise AssertionError("state-dependent drift should be refused")

    round_trip = sp.Spec.from_toml(chattering.to_toml())
    assert round_trip.to_toml() == chattering.to_toml()

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
