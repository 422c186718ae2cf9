"""Smoke test for the tomolift extension module.

Build it first:

    cargo build --release -p tomolift-py --features extension-module

then run `python3 crates/py/python/smoke_test.py`. If `tomolift` is not
importable the script loads target/release/libtomolift_py.so directly.
"""

import importlib.machinery
import importlib.util
import math
import pathlib
import sys


def load():
    try:
        import tomolift
        return tomolift
    except ImportError:
        pass
    root = pathlib.Path(__file__).resolve().parents[3]
    for profile in ("release", "debug"):
        lib = root / "target" / profile / "libtomolift_py.so"
        if lib.exists():
            loader = importlib.machinery.ExtensionFileLoader("tomolift", str(lib))
            spec = importlib.util.spec_from_file_location("tomolift", lib, loader=loader)
            module = importlib.util.module_from_spec(spec)
            loader.exec_module(module)
            sys.modules["tomolift"] = module
            return module
    sys.exit("tomolift extension not found; build it with --features extension-module")


def main():
    tl = load()

    cat = tl.DensityMatrix.cat(2)
    assert cat.dim == 4 and cat.qubits == 2
    assert abs(cat.purity() - 1.0) < 1e-12
    assert abs(cat.rows()[0][3] - 0.5) < 1e-15

    zz = tl.born_probabilities(cat, 8)
    assert all(abs(p - q) < 1e-12 for p, q in zip(zz, [0.5, 0.0, 0.0, 0.5]))

    mixed = tl.DensityMatrix.maximally_mixed(2)
    assert abs(tl.mse(cat, mixed) - 0.046875) < 1e-15

    rho, info = tl.estimate(tl.predicted_frequencies(cat))
    assert tl.mse(rho, cat) <= 1e-8, info
    assert info["converged"]

    weights = tl.setting_weights(cat)
    assert abs(sum(weights) - 1.0) < 1e-12
    assert tl.allocate([0.5, 0.3, 0.2], 10) == [5, 3, 2]
    assert len(tl.decompose(cat)) == 36

    single = tl.DensityMatrix([[0.5, 0.5j], [-0.5j, 0.5]])
    assert abs(tl.trace_distance(single, tl.DensityMatrix.maximally_mixed(1)) - 0.5) < 1e-12

    try:
        tl.DensityMatrix([[1.0, 0.0], [0.0, 1.0]])
    except ValueError:
        pass
    else:
        raise AssertionError("trace-2 matrix accepted")

    fixed = tl.run_experiment("cat", 2, 9000, method="fixed", seed=1)
    adaptive = tl.run_experiment("cat", 2, 9000, method="two_step", seed=1)
    assert fixed["copies_consumed"] == adaptive["copies_consumed"] == 9000
    assert adaptive["mse"] < fixed["mse"]
    three = tl.run_experiment("random", 2, 9000, method="three_step", r=0.5, r2=0.2, rank=4, state_seed=7)
    assert len(three["allocations"]) == 3
    assert math.isfinite(three["mse"])

    print(f"fixed mse {fixed['mse']:.3e}, two-step mse {adaptive['mse']:.3e}")
    print("smoke test passed")


if __name__ == "__main__":
    main()
