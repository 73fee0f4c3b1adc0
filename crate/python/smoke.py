"""Smoke test for the pydomconf extension module.

Build and install first:
    pip install --no-build-isolation -e crates/python
"""

import math

import pydomconf as dc


def main():
    xs, ys, xt, yt = dc.synth_domains(seed=1)
    before = dc.mmd_linear(xs, xt)
    assert before > 0.5, before
    assert dc.mmd_linear(xs, xs) == 0.0
    assert dc.mmd2_kernel(xs, xt) > 0.0

    basis, _ = dc.pca(xs, 4)
    other, _ = dc.pca(xt, 4)
    angles = dc.principal_angles(basis, other)
    assert all(0.0 <= a <= math.pi / 2 + 1e-12 for a in angles)
    g = dc.gfk(basis, basis)
    assert abs(g[0][0] - sum(b * b for b in basis[0])) < 1e-8
    m = dc.sa_align(basis, basis)
    assert abs(m[0][0] - 1.0) < 1e-10

    aug = dc.daume_augment([[1.0, 2.0]], True)
    assert aug == [[1.0, 2.0, 1.0, 2.0, 0.0, 0.0]]
    assert dc.late_fusion([0.1, 0.9], [0.8, 0.2], mode="max") == [0.8, 0.9]

    w, b, obj = dc.svm(xs, ys)
    assert len(w) == 5 and len(b) == 5 and obj > 0.0

    net = dc.AdaptationNet(16, 8, 5, seed=0)
    curve = net.fit(xs, ys, xt, lam=0.25, iterations=200)
    assert curve[-1][2] < before
    clone = dc.AdaptationNet.from_bytes(bytes(net.to_bytes()))
    assert clone.predict(xt) == net.predict(xt)
    acc = sum(p == y for p, y in zip(net.predict(xt), yt)) / len(yt)

    report = dc.run_experiment("method = sa\nsplit.n_splits = 2\n")
    assert len(report["accuracies"]) == 2

    try:
        dc.mmd_linear([[1.0, 2.0]], [[1.0]])
    except ValueError:
        pass
    else:
        raise AssertionError("dimension mismatch not rejected")

    print(f"pydomconf smoke ok: mmd {before:.3f} -> {curve[-1][2]:.3f}, "
          f"net accuracy {acc:.3f}, sa mean {report['mean_accuracy']:.3f}")


if __name__ == "__main__":
    main()
