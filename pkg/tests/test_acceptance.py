"""Acceptance criteria, one test per criterion at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -s`` to see the per-criterion
PASS/FAIL lines as they complete; the same checks back the ``ballconv
verify`` command.  The heavyweight training artifacts are built once in
module-scoped fixtures and shared by the classification and robustness
criteria.
"""

import time

import numpy as np
import pytest

from ballconv import network, shapes, verify
from ballconv.cli import recon_vs_n_series
from ballconv.moments import fit_moments
from ballconv.shapes import synth_bandlimited


def report(criterion: str, passed: bool, detail: str) -> None:
    print(f"[{criterion}] {'PASS' if passed else 'FAIL'}: {detail}")
    assert passed, f"{criterion}: {detail}"


# ---------------------------------------------------------------------------
# 1. basis orthogonality under the dense product quadrature
# ---------------------------------------------------------------------------

def test_criterion_1_orthogonality():
    t0 = time.time()
    checks = verify.run_orthogonality(seed=0, nodes=64)
    elapsed = time.time() - t0
    by_name = {c.name: c for c in checks}
    off = by_name["gram_max_offdiagonal_over_min_diagonal"]
    spread = by_name["gram_diagonal_relative_spread"]
    report("criterion-1 orthogonality",
           off.passed and spread.passed and elapsed < 60.0,
           f"offdiag/diag {off.measured:.2e} < 1e-6, diag spread {spread.measured:.2e} "
           f"< 1e-6, runtime {elapsed:.1f}s < 60s (64^3 nodes)")


# ---------------------------------------------------------------------------
# 2. moment fitting accuracy and the estimator comparison
# ---------------------------------------------------------------------------

def test_criterion_2_moment_fitting():
    worst = 0.0
    for seed in range(5):
        truth, samples = synth_bandlimited(seed=seed, n_samples=8192)
        c = fit_moments(samples, 6)
        worst = max(worst, float(np.linalg.norm(c.c - truth.c) / np.linalg.norm(truth.c)))
    fit_ok = worst < 1e-6

    orders, series = recon_vs_n_series(seed=0, k_samples=1536)
    ordering_ok = all(l < q for l, q in zip(series["lsq"], series["quadrature"]))
    report("criterion-2 moment-fitting",
           fit_ok and ordering_ok,
           f"band-limited recovery rel err {worst:.2e} < 1e-6 (5 seeds, 8192 samples); "
           f"lsq < quadrature mean reconstruction error at n={orders} on 10 shapes "
           f"(lsq {['%.1e' % v for v in series['lsq']]} vs "
           f"quad {['%.1e' % v for v in series['quadrature']]})")


# ---------------------------------------------------------------------------
# 3. iterative pseudo-inverse vs the SVD oracle
# ---------------------------------------------------------------------------

def test_criterion_3_pseudo_inverse():
    from ballconv.moments import pinv_newton_schulz

    worst_resid, worst_dist = 0.0, 0.0
    for seed in range(5):
        rng = np.random.default_rng(seed)
        A = rng.normal(size=(500, 100))
        P = pinv_newton_schulz(A, alpha=0.001, iters=30)
        worst_resid = max(worst_resid,
                          float(np.linalg.norm(A @ P @ A - A) / np.linalg.norm(A)))
        ref = np.linalg.pinv(A)
        worst_dist = max(worst_dist, float(np.linalg.norm(P - ref) / np.linalg.norm(ref)))
    report("criterion-3 pseudo-inverse",
           worst_resid < 1e-3 and worst_dist < 1e-3,
           f"alpha=0.001, 30 iterations, 5 random 500x100 matrices: "
           f"residual {worst_resid:.2e} < 1e-3, SVD distance {worst_dist:.2e} < 1e-3")


# ---------------------------------------------------------------------------
# 4. rotation equivariance
# ---------------------------------------------------------------------------

def test_criterion_4_rotation_equivariance():
    check = verify.run_rotation_equivariance(seed=0, n_trials=20)
    report("criterion-4 rotation-equivariance", check.passed,
           f"20 random (f, g, rotation) triples on the 32x16 grid: "
           f"max relative error {check.measured:.2e} < 1e-3")


# ---------------------------------------------------------------------------
# 5. convolution against the spatial rotate-and-integrate oracle
# ---------------------------------------------------------------------------

def test_criterion_5_convolution_oracle():
    check = verify.run_conv_oracle(seed=0, n_pairs=10, n_dirs=50)
    report("criterion-5 convolution-oracle", check.passed,
           f"10 random pairs x 50 directions: max relative error "
           f"{check.measured:.2e} < 1e-4")


# ---------------------------------------------------------------------------
# 6. radial translation equivariance
# ---------------------------------------------------------------------------

def test_criterion_6_radial_translation():
    checks = verify.run_radial(seed=0)
    perm = next(c for c in checks if c.name == "radial_shift_slice_permutation_max_abs")
    report("criterion-6 radial-translation", perm.passed,
           f"one-shell shift permutes response slices: per-value error "
           f"{perm.measured:.2e} < 1e-6")


# ---------------------------------------------------------------------------
# 7. axial symmetry against the rotate-project oracle
# ---------------------------------------------------------------------------

def test_criterion_7_axial_symmetry():
    checks = verify.run_symmetry(seed=0, n_pairs=100)
    by_name = {c.name: c for c in checks}
    oracle = by_name["symmetry_power_vs_rotate_project_oracle_rel"]
    pole = by_name["normalized_symmetry_m0_about_pole_err"]
    report("criterion-7 axial-symmetry", oracle.passed and pole.passed,
           f"100 (f, axis) pairs: max relative error {oracle.measured:.2e} < 1e-4; "
           f"m=0-only normalized value off by {pole.measured:.2e} < 1e-9 at the pole")


# ---------------------------------------------------------------------------
# 8. gradient checks
# ---------------------------------------------------------------------------

def test_criterion_8_gradients():
    checks = verify.run_gradcheck(seed=0, n_coords=20, h=1e-4)
    worst = max(c.measured for c in checks)
    report("criterion-8 gradients", all(c.passed for c in checks),
           f"central differences (h=1e-4), 20 coordinates per group "
           f"{{kernels, W1, W2, fc}}: worst relative error {worst:.2e} < 1e-4")


# ---------------------------------------------------------------------------
# 9 and 10. toy classification, ablation ordering, robustness to data loss
# ---------------------------------------------------------------------------

N_TRAIN, N_TEST, K_POINTS, EPOCHS, SEED = 100, 30, 1536, 12, 0


@pytest.fixture(scope="module")
def toy_models():
    data = shapes.synth_classes(SEED, n_train=N_TRAIN, n_test=N_TEST, k_points=K_POINTS)
    y_train = np.array([s.label for s in data.train])
    y_test = np.array([s.label for s in data.test])
    out = {"data": data, "y_test": y_test}
    for conv in ("volumetric", "spherical"):
        cfg = network.PipelineConfig(conv=conv)
        t0 = time.time()
        ftr = network.extract_features(data.train, cfg, threads=4)
        fte = network.extract_features(data.test, cfg, threads=4)
        params, hist = network.train(ftr, y_train, cfg, seed=SEED, epochs=EPOCHS,
                                     test_features=fte, test_labels=y_test)
        out[conv] = {
            "cfg": cfg, "params": params, "accuracy": hist.test_accuracy[-1],
            "seconds": time.time() - t0,
        }
    return out


def test_criterion_9_toy_classification(toy_models):
    vol = toy_models["volumetric"]
    sph = toy_models["spherical"]
    ok = (vol["accuracy"] >= 0.90 and sph["accuracy"] < vol["accuracy"]
          and vol["seconds"] < 300.0)
    report("criterion-9 toy-classification", ok,
           f"volumetric (16 kernels, 10 shells, N=6) held-out accuracy "
           f"{vol['accuracy']:.3f} >= 0.90 in {vol['seconds']:.0f}s < 300s; "
           f"spherical ablation {sph['accuracy']:.3f} strictly lower on the same data/seed")


def test_criterion_10_robustness(toy_models):
    vol = toy_models["volumetric"]
    data = toy_models["data"]
    y_test = toy_models["y_test"]
    rng = np.random.default_rng(SEED + 1)
    damaged = [shapes.LabeledShape(s.shape_id, s.label,
                                   shapes.remove_points(s.samples, 0.2, rng))
               for s in data.test]
    feats = network.extract_features(damaged, vol["cfg"], threads=4)
    acc = network.evaluate(feats, y_test, vol["params"], vol["cfg"])
    drop = vol["accuracy"] - acc
    report("criterion-10 robustness", drop < 0.05,
           f"accuracy at 20% random point removal {acc:.3f}, baseline "
           f"{vol['accuracy']:.3f}: drop {100 * drop:.1f} points < 5")


# ---------------------------------------------------------------------------
# 11. surface convolution baseline
# ---------------------------------------------------------------------------

def test_criterion_11_surface_convolution():
    check = verify.run_spherical_oracle(seed=0)
    report("criterion-11 surface-convolution", check.passed,
           f"band-limited spectra vs rotate-and-integrate on the sphere: "
           f"max relative error {check.measured:.2e} < 1e-4")
