"""Smoke test for the `hvi` extension module.

Uses an installed `hvi` when importable, otherwise loads the library built by
`cargo build -p hvi-py --release --features extension-module`.
"""

import importlib.util
import math
import pathlib
import sys
import tempfile


def load():
    try:
        import hvi

        return hvi
    except ImportError:
        pass
    root = pathlib.Path(__file__).resolve().parent.parent
    for name in ("libhvi.so", "libhvi.dylib", "hvi.dll"):
        lib = root / "target" / "release" / name
        if lib.exists():
            spec = importlib.util.spec_from_file_location("hvi", lib)
            module = importlib.util.module_from_spec(spec)
            spec.loader.exec_module(module)
            return module
    sys.exit("hvi module not found; build crates/py first")


def main():
    hvi = load()

    ids = hvi.potentials()
    assert "exp_quadratic" in ids and "abs" in ids, ids

    s = hvi.solve(8, alpha=9.0, b=1.0, problem="robin")
    err = max(abs(u - 0.9 * x) for u, x in zip(s.u, s.x))
    assert err < 1e-10, err

    s = hvi.solve(16, alpha=10.0, b=1.0, g=-1.0, q=0.5, potential="exp_quadratic")
    assert s.converged and s.certificate_max <= 1e-8, s
    assert max(s.u) <= 1.0 + 1e-9

    m_a, gamma = hvi.coercivity(8)
    assert 0.7 < m_a < 0.72 and abs(gamma - 1.0) < 1e-6, (m_a, gamma)

    ok, text = hvi.check_potential("abs", 1.0)
    assert ok and "HHH: pass" in text

    try:
        hvi.solve(4, alpha=1.0, b=1.0, potential="cubic")
    except ValueError as e:
        assert "cubic" in str(e)
    else:
        raise AssertionError("unknown potential accepted")

    with tempfile.TemporaryDirectory() as d:
        cfg = pathlib.Path(d) / "run.cfg"
        cfg.write_text("mesh.n = 8\nproblem.b = 1\nproblem.alpha = 10\npotential.id = quadratic\n")
        status = hvi.run("solve", str(cfg), str(pathlib.Path(d) / "out"))
        assert status == 0, status
        assert (pathlib.Path(d) / "out" / "certificate.txt").exists()

    print("smoke test passed:", s, f"m_a={m_a:.4f}", f"gamma={gamma:.4f}")
    return 0 if math.isfinite(s.v_norm) else 1


if __name__ == "__main__":
    sys.exit(main())
