"""Acceptance suite: one test per criterion, one printed line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the pass/fail
line per criterion.  Every tolerance is pinned here, not configurable.
"""

import json
import time

import numpy as np
import pytest

from levelpath import (CrossEntropy, Dataset, NetworkSpec, Theta,
                       align_first_layer, barrier_scan, build_width_n_instance,
                       certify_disconnection, connect_sublevel,
                       embed_extra_neuron, first_layer_permutation_path,
                       forward, lerp_theta, loss, numeric_rank, permute_neurons,
                       random_theta, restore_full_rank, span_coefficients,
                       train_gd, transfer_neuron, verify_path, width_n_spec,
                       zero_dependent_rows)
from levelpath.linalg import independent_columns

LAMBDA_GRID = np.linspace(0.0, 1.0, 21)


def _report(criterion: str, detail: str) -> None:
    print(f"ACCEPTANCE {criterion}: PASS  [{detail}]")


def test_criterion_1_closed_form_curves():
    """Closed-form product invariance and exact endpoints, 500 instances."""
    start = time.monotonic()
    rng = np.random.default_rng(2024)
    worst_rel = 0.0
    for trial in range(500):
        N = int(rng.integers(1, 9))
        p = int(rng.integers(1, 5))
        if trial % 2 == 0:
            # span curve: dependent columns built from a random basis
            n_basis = int(rng.integers(1, 7))
            n_dep = int(rng.integers(1, 6))
            n = min(n_basis + n_dep, 12)
            n_dep = n - n_basis
            if n_dep < 1:
                n_basis, n_dep = n - 1, 1
            B = rng.standard_normal((N, n_basis))
            F = np.hstack([B, B @ rng.standard_normal((n_basis, n_dep))])
            W = rng.standard_normal((n, p))
            I = list(range(n_basis))
            Ibar = list(range(n_basis, n))
            E = span_coefficients(F, I, Ibar)
            curve = zero_dependent_rows(F, W, I, E)
            end_expected = W.copy()
            end_expected[I, :] = W[I, :] + E @ W[Ibar, :]
            end_expected[Ibar, :] = 0.0
        else:
            # transfer curve: a silenced twin neuron
            n = int(rng.integers(2, 13))
            F = rng.standard_normal((N, n))
            k, j = (int(v) for v in rng.choice(n, size=2, replace=False))
            F[:, j] = F[:, k]
            W = rng.standard_normal((n, p))
            W[j, :] = 0.0
            curve = transfer_neuron(F, W, j=j, k=k)
            end_expected = W.copy()
            end_expected[j, :] = W[k, :]
            end_expected[k, :] = 0.0
        assert np.array_equal(curve.at(0.0), W)
        assert np.array_equal(curve.at(1.0), end_expected)
        product = F @ W
        scale = float(np.linalg.norm(product))
        for lam in LAMBDA_GRID:
            drift = float(np.linalg.norm(F @ curve.at(float(lam)) - product))
            assert drift <= 1e-10 * scale
            if scale > 0:
                worst_rel = max(worst_rel, drift / scale)
    elapsed = time.monotonic() - start
    assert elapsed < 10.0
    _report("1", f"500 instances, worst relative drift {worst_rel:.2e}, {elapsed:.1f}s")


def _degenerate_instance(N, seed):
    """n1 = N+1 first layer whose neurons repeat r < N distinct columns."""
    rng = np.random.default_rng(seed)
    n0 = int(rng.integers(1, 4))
    n1 = N + 1
    spec = NetworkSpec((n0, n1, 1))
    data = Dataset(rng.standard_normal((N, n0)), rng.standard_normal((N, 1)))
    r = int(rng.integers(1, N))
    base_W = rng.standard_normal((n0, r))
    base_b = rng.standard_normal(r)
    picks = rng.integers(0, r, n1)
    theta = Theta((base_W[:, picks], rng.standard_normal((n1, 1))), (base_b[picks],))
    return spec, data, theta


def test_criterion_2_rank_restoration():
    """200 degenerate instances restored to rank N with tiny output drift."""
    failures = 0
    worst_drift = 0.0
    for seed in range(200):
        rng = np.random.default_rng(seed)
        N = int(rng.integers(2, 17))
        spec, data, theta = _degenerate_instance(N, seed)
        assert numeric_rank(forward(spec, theta, data.X)[1]).rank < N
        result = restore_full_rank(spec, data, theta, rng=seed)
        if result.achieved_rank.rank != N:
            failures += 1
            continue
        report = verify_path(spec, data, result.path, alpha=np.inf, n_samples=25,
                             expected_endpoints=(theta, result.path.end))
        drift = max(report.per_segment_invariance)
        worst_drift = max(worst_drift, drift)
        if drift > 1e-8:
            failures += 1
    assert failures == 0
    _report("2", f"200 instances, zero failures, worst output drift {worst_drift:.2e}")


def test_criterion_3_first_layer_alignment():
    """50 random pairs end exactly at the target first layer, flat loss."""
    worst_rel = 0.0
    for seed in range(50):
        rng = np.random.default_rng(5000 + seed)
        N = int(rng.integers(2, 9))
        n1 = N + 1
        depth3 = seed % 2 == 1
        widths = (2, n1, 2, 1) if depth3 else (2, n1, 1)
        spec = NetworkSpec(widths)
        data = Dataset(rng.standard_normal((N, 2)), rng.standard_normal((N, 1)))
        ta = restore_full_rank(spec, data, random_theta(spec, seed), rng=seed).path.end
        tb = restore_full_rank(spec, data, random_theta(spec, 900 + seed),
                               rng=seed + 1).path.end
        lead = sorted(independent_columns(forward(spec, tb, data.X)[1]))
        order = lead + sorted(set(range(n1)) - set(lead))
        tb = first_layer_permutation_path(spec, data, tb, order).end
        path = align_first_layer(spec, data, ta, tb)
        assert np.array_equal(path.end.weights[0], tb.weights[0])
        assert np.array_equal(path.end.biases[0], tb.biases[0])
        base = loss(spec, ta, data)
        variation = max(abs(loss(spec, point, data) - base)
                        for _, _, point in path.sample(25))
        rel = variation / max(1.0, abs(base))
        worst_rel = max(worst_rel, rel)
        assert rel <= 1e-7
    _report("3", f"50 pairs, exact targets, worst relative loss variation {worst_rel:.2e}")


def test_criterion_4_end_to_end_sublevel_connection():
    """20 trained pairs connected and verified at alpha = max endpoint loss."""
    start = time.monotonic()
    cases = []
    for depth3 in (False, True):
        for ce in (False, True):
            for N in (3, 4, 5, 6, 8):
                cases.append((depth3, ce, N))
    assert len(cases) == 20
    worst_excess = -np.inf
    for idx, (depth3, ce, N) in enumerate(cases):
        rng = np.random.default_rng(7000 + idx)
        n1 = N + 1
        n_out = 2 if ce else 1
        widths = (2, n1, 3, n_out) if depth3 else (2, n1, n_out)
        spec = NetworkSpec(widths, loss=CrossEntropy() if ce else None) \
            if ce else NetworkSpec(widths)
        X = rng.standard_normal((N, 2))
        if ce:
            Y = np.zeros((N, n_out))
            Y[np.arange(N), rng.integers(0, n_out, N)] = 1.0
        else:
            Y = rng.standard_normal((N, n_out))
        data = Dataset(X, Y)
        lr = 0.2 if ce else 0.05
        ra = train_gd(spec, data, steps=1200, lr=lr, seed=2 * idx)
        rb = train_gd(spec, data, steps=1200, lr=lr, seed=2 * idx + 1)
        alpha = max(ra.final_loss, rb.final_loss)
        path = connect_sublevel(spec, data, ra.theta, rb.theta, alpha, rng=idx)
        report = verify_path(spec, data, path, alpha, n_samples=200,
                             expected_endpoints=(ra.theta, rb.theta))
        assert report.passed, (idx, report.max_loss, alpha)
        assert report.max_loss <= alpha + 1e-6
        worst_excess = max(worst_excess, report.max_loss - alpha)
    elapsed = time.monotonic() - start
    assert elapsed < 120.0
    _report("4", f"20 trained pairs, worst excess over alpha {worst_excess:.2e}, "
                 f"{elapsed:.0f}s")


def test_criterion_5_last_layer_convexity():
    """1000 straight last-layer segments below the chord bound."""
    rng = np.random.default_rng(99)
    worst = -np.inf
    for _ in range(1000):
        N = int(rng.integers(1, 6))
        widths = (2, int(rng.integers(2, 5)), int(rng.integers(1, 4)))
        ce = bool(rng.integers(0, 2)) and widths[-1] >= 2
        spec = NetworkSpec(widths, loss=CrossEntropy()) if ce else NetworkSpec(widths)
        X = rng.standard_normal((N, 2))
        if ce:
            Y = np.zeros((N, widths[-1]))
            Y[np.arange(N), rng.integers(0, widths[-1], N)] = 1.0
        else:
            Y = rng.standard_normal((N, widths[-1]))
        data = Dataset(X, Y)
        theta = random_theta(spec, int(rng.integers(1 << 30)))
        other = theta.replace(spec.depth,
                              W=rng.standard_normal(theta.weights[-1].shape))
        l0, l1 = loss(spec, theta, data), loss(spec, other, data)
        for lam in rng.uniform(0.0, 1.0, 5):
            value = loss(spec, lerp_theta(theta, other, float(lam)), data)
            excess = value - ((1 - lam) * l0 + lam * l1)
            worst = max(worst, excess)
            assert excess <= 1e-10
    _report("5", f"1000 trials, worst chord excess {worst:.2e}")


def test_criterion_6_disconnection_certificates():
    """50 instances: valid certificate and positive straight-line barrier."""
    min_barrier = np.inf
    for N in (2, 3, 4, 5, 6):
        for trial in range(10):
            seed = 100 * N + trial
            data, theta = build_width_n_instance(N=N, n0=2, seed=seed)
            spec = width_n_spec(N, 2)
            swapped = permute_neurons(theta, 0, 1)
            cert = certify_disconnection(spec, data, theta, swapped)
            assert cert.valid, (N, trial)
            assert cert.y_rank == N
            assert cert.loss_theta <= 1e-10 and cert.loss_theta_prime <= 1e-10
            assert cert.det_sign_theta * cert.det_sign_theta_prime == -1
            barrier = barrier_scan(spec, data, theta, swapped,
                                   strategies=("line",), n_samples=257)
            assert barrier > 0.0, (N, trial)
            min_barrier = min(min_barrier, barrier)
    _report("6", f"50 certificates valid, smallest line barrier {min_barrier:.3g}")


def test_criterion_7_width_contrast():
    """Certified width-N pairs connect after adding one silent neuron."""
    successes = 0
    for seed in range(10):
        data, theta = build_width_n_instance(N=3, n0=2, seed=3000 + seed)
        spec = width_n_spec(3, 2)
        swapped = permute_neurons(theta, 0, 1)
        cert = certify_disconnection(spec, data, theta, swapped)
        assert cert.valid
        wide_spec, wa = embed_extra_neuron(spec, theta, rng=seed)
        _, wb = embed_extra_neuron(spec, swapped, rng=seed)
        try:
            path = connect_sublevel(wide_spec, data, wa, wb, 1e-10, rng=seed)
            report = verify_path(wide_spec, data, path, 1e-10, n_samples=200,
                                 expected_endpoints=(wa, wb))
            if report.passed:
                successes += 1
        except Exception:
            pass
    assert successes >= 9
    _report("7", f"{successes}/10 widened pairs connected at bound 1e-10 + 1e-6")


def test_criterion_8_determinism():
    """Fixed seeds reproduce reports and certificates byte for byte."""
    spec = NetworkSpec((2, 5, 1))
    rng = np.random.default_rng(55)
    data = Dataset(rng.standard_normal((4, 2)), rng.standard_normal((4, 1)))
    ra = train_gd(spec, data, steps=800, lr=0.05, seed=1)
    rb = train_gd(spec, data, steps=800, lr=0.05, seed=2)
    alpha = max(ra.final_loss, rb.final_loss)

    def run_once():
        path = connect_sublevel(spec, data, ra.theta, rb.theta, alpha, rng=7)
        report = verify_path(spec, data, path, alpha, n_samples=100,
                             expected_endpoints=(ra.theta, rb.theta))
        return json.dumps(report.to_json_dict(), sort_keys=True)

    assert run_once() == run_once()

    def cert_once():
        data_c, theta_c = build_width_n_instance(N=3, n0=2, seed=11)
        cert = certify_disconnection(width_n_spec(3, 2), data_c, theta_c,
                                     permute_neurons(theta_c, 0, 1))
        return json.dumps(cert.to_json_dict(), sort_keys=True)

    assert cert_once() == cert_once()
    _report("8", "repeated runs byte-identical (timestamps excluded)")
