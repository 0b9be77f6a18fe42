"""Quick check of the Python bindings.

Build and install first:
    maturin build --release -m crates/py/Cargo.toml
    pip install target/wheels/expstab-*.whl
"""
import cmath
import math
import tempfile

import expstab


def main():
    # phi_1(z) = (e^z - 1) / z
    z = 0.3 + 2.0j
    assert abs(expstab.phi(1, z) - (cmath.exp(z) - 1) / z) < 1e-14
    assert expstab.phi_all(3, 0j)[3] == 1 / 6

    r, cls = expstab.amplification("erk4", 1.0, 0.0)
    assert abs(r - 1.0) < 1e-12 and cls == "stable", (r, cls)
    r, cls = expstab.amplification("epbm5", 0.0, 1.0, math.pi / 2048)
    assert cls in ("stable", "marginal", "unstable")

    grid = expstab.stability_grid("erk4", (0, 6), (0, 2), (7, 3), math.pi / 2048)
    assert len(grid["abs_r"]) == 7 and len(grid["abs_r"][0]) == 3

    zds = expstab.Problem.zds(64)
    run = zds.integrate("imrk4", 1.0, 200)
    ref = zds.integrate("rk4", 1.0, 2000)
    err = expstab.relative_error(run["y"], ref["y"])
    assert run["status"] == "ok" and err < 1e-6, err

    rep = zds.repartition("abs_k3", math.pi / 128)
    assert rep.modification.startswith("abs_k3")
    assert rep.integrate("erk4", 1.0, 200)["status"] == "ok"
    assert zds.integrate("rk4", 40.0, 20)["status"] == "blowup"

    kdv = expstab.Problem.kdv(64)
    out = kdv.integrate("erk4", 1.0, 100, sample_times=[0.5, 1.0])
    assert len(out["samples"]) == 2

    try:
        zds.integrate("erk4", 1.0, 0)
    except ValueError:
        pass
    else:
        raise AssertionError("zero steps accepted")

    with tempfile.TemporaryDirectory() as tmp:
        path = expstab.run(
            "converge",
            [("nx", "32"), ("t_end", "1"), ("steps", "10,20"), ("methods", "erk4"),
             ("reference_steps", "200"), ("out", tmp)],
            cache_dir=tmp + "/cache",
        )
        lines = open(path).read().splitlines()
        assert lines[0].startswith("method,modification,n_steps") and len(lines) == 3

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
