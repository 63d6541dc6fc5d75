"""Builds the extension module and exercises the Python API.

    python3 python/smoke_test.py
"""

import math
import pathlib
import shutil
import subprocess
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent
FIXTURE = ROOT / "crates/core/tests/fixtures/collinear_counts.csv"


def build():
    subprocess.run(
        ["cargo", "build", "--release", "-p", "liutype-nb-py", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )
    lib = ROOT / "target/release/libliutype_nb_py.so"
    out = pathlib.Path(tempfile.mkdtemp())
    shutil.copy(lib, out / "liutype_nb_py.so")
    sys.path.insert(0, str(out))


def main():
    build()
    import liutype_nb_py as nb

    fit = nb.fit([[], [], []], [1, 2, 3], theta=1.0)
    assert abs(fit.coefficients("mle")[0] - math.log(2)) < 1e-8

    fit = nb.fit_csv(str(FIXTURE), "y")
    print(fit)
    sel = fit.selected()
    assert sel["k_max"] >= sel["k_am"] > 0
    mle = fit.coefficients("mle")
    lt = fit.coefficients("lt", k=0.7, d=-0.7)
    assert max(abs(a - b) for a, b in zip(mle, lt)) < 1e-8
    ses = fit.std_errors("lt")
    assert len(ses) == 3 and all(s > 0 for s in ses)
    cov = fit.covariance("rr")
    assert len(cov) == 3 and all(len(r) == 3 for r in cov)
    assert fit.mse("lt") >= 0
    verdicts = fit.check_theorems(k=0.5, d=-0.5)
    assert [v["theorem"] for v in verdicts] == ["T2.2", "T2.3", "T2.4"]
    assert not verdicts[0]["difference_pd"]
    assert "LT(kMAX)" in fit.report()

    total = sum(math.exp(nb.nb_logpmf(y, 2.0, 1.0)) for y in range(400))
    assert abs(total - 1.0) < 1e-12
    draws = nb.nb_sample([2.0] * 1000, 1.0, 7)
    assert draws == nb.nb_sample([2.0] * 1000, 1.0, 7)

    lam, alpha = [10.0, 1.0, 0.01], [0.5, -0.2, 1.5]
    d = nb.select_d(lam, alpha)
    assert nb.select_k("max", lam, alpha, d) >= nb.select_k("am", lam, alpha, d)
    assert 0.0 <= nb.select_d5(lam, alpha) < 1.0
    assert nb.select_k5(lam, alpha) > 0

    a = nb.simulate_cell(40, 3, 0.9, 1.0, 50, 11, workers=1)
    b = nb.simulate_cell(40, 3, 0.9, 1.0, 50, 11, workers=2)
    assert a == b, (a, b)
    print(a)

    try:
        nb.fit([[1.0]], [1, 2], theta=1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("mismatched lengths accepted")
    print("python smoke test passed")


if __name__ == "__main__":
    main()
