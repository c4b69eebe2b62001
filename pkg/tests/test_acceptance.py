"""Top-level acceptance gates.

Each test exercises one release criterion end to end at its stated
tolerance and prints a single summary line with the measured numbers
(run with -s to see them alongside the pass/fail verdicts).
"""

import math
import time

import numpy as np
import pytest
from scipy.integrate import quad

from hrtrack import (
    BinDistribution,
    HrGrid,
    PredictionRecord,
    SpectralEmission,
    SynthConfig,
    calibration_curve,
    discretize_transition,
    dist_stats,
    emissions_from_windows,
    filter_beliefs,
    fit_transition,
    gaussian_label,
    make_windows,
    nll,
    rejection_sweep,
    synth_hr_walk,
    synth_session,
    upsample,
    viterbi,
)
from hrtrack.cli import main

GRID = HrGrid(64, 30.0, 210.0)


def report(name, detail):
    print(f"[acceptance] {name}: PASS ({detail})")


@pytest.fixture(scope="module")
def artifact_suite():
    """Ten seeded 240 s sessions with 30% corrupted windows at +30 BPM."""
    out = []
    src = SpectralEmission(GRID)
    for seed in range(10):
        hr = synth_hr_walk(0.0, 0.02, 121, seed=1000 + seed)
        cfg = SynthConfig(seed=seed, artifact_fraction=0.3,
                          artifact_offset_bpm=30.0, artifact_amplitude=2.0)
        sess = synth_session(hr, cfg)
        ems = emissions_from_windows(make_windows(sess), src)
        model = discretize_transition(*fit_transition([sess.label_bpm]), GRID)
        trace = filter_beliefs(ems, model)
        _, vit_bpm = viterbi(ems, model)
        truth = sess.truth_at(ems.times)
        out.append({
            "name": sess.name, "emissions": ems, "trace": trace,
            "viterbi_bpm": vit_bpm, "truth": truth,
        })
    return out


def suite_records(suite):
    records = []
    for item in suite:
        trace, truth = item["trace"], item["truth"]
        for k, t in enumerate(item["emissions"].times):
            records.append(PredictionRecord(
                session_id=item["name"], time_s=float(t),
                predicted_bpm=float(trace.means[k]), truth_bpm=float(truth[k]),
                entropy=float(trace.entropies[k]), std=float(trace.stds[k]),
            ))
    return records


def test_quantization_error():
    start = time.perf_counter()
    errs = []
    for y in np.arange(40.0, 200.0 + 1e-9, 0.1):
        d = gaussian_label(GRID, float(y), sigma_y=1.5)
        errs.append(abs(float(y) - dist_stats(d).mean))
    elapsed = time.perf_counter() - start
    mean_err, max_err = float(np.mean(errs)), float(np.max(errs))
    assert 0.01 <= mean_err <= 0.03, mean_err
    assert max_err <= 0.05, max_err
    assert elapsed < 1.0, elapsed
    report("quantization error",
           f"mean {mean_err:.4f} BPM in [0.01, 0.03], max {max_err:.4f} <= 0.05, "
           f"{elapsed:.2f} s")


def test_oracle_equivalence():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        c = int(rng.integers(3, 7))
        steps = int(rng.integers(2, 7))
        g = HrGrid(c, 30.0, 210.0)
        matrix = rng.uniform(0.05, 1.0, (c, c))
        matrix /= matrix.sum(axis=1, keepdims=True)
        init = rng.uniform(0.05, 1.0, c)
        init /= init.sum()
        ems = rng.uniform(0.05, 1.0, (steps, c))
        ems /= ems.sum(axis=1, keepdims=True)

        from hrtrack import TransitionModel
        model = TransitionModel(grid=g, mu=0.0, sigma=0.1, matrix=matrix)
        dists = [BinDistribution(g, e) for e in ems]
        trace = filter_beliefs(dists, model, init=BinDistribution(g, init))
        path, _ = viterbi(dists, model, init=BinDistribution(g, init))

        joint = init * ems[0]
        marginals = [joint / joint.sum()]
        for t in range(1, steps):
            joint = joint[..., None] * matrix * ems[t]
            marg = joint.reshape(-1, c).sum(axis=0)
            marginals.append(marg / marg.sum())
        worst = max(worst, float(np.abs(trace.posteriors - np.stack(marginals)).max()))
        best = np.array(np.unravel_index(int(joint.argmax()), (c,) * steps))
        assert np.array_equal(path, best), (path, best)
    elapsed = time.perf_counter() - start
    assert worst <= 1e-10, worst
    assert elapsed < 5.0, elapsed
    report("oracle equivalence",
           f"200 instances, filter max dev {worst:.2e} <= 1e-10, "
           f"all Viterbi paths exact, {elapsed:.2f} s")


def test_transition_validity():
    rng = np.random.default_rng(77)
    worst_row = 0.0
    for _ in range(50):
        mu = float(rng.uniform(-0.05, 0.05))
        sigma = float(rng.uniform(0.005, 0.3))
        c = int(rng.integers(3, 65))
        m = discretize_transition(mu, sigma, HrGrid(c, 30.0, 210.0)).matrix
        worst_row = max(worst_row, float(np.abs(m.sum(axis=1) - 1.0).max()))
    assert worst_row <= 1e-9, worst_row

    g3 = HrGrid(3, 30.0, 210.0)
    worst_quad = 0.0
    for mu, sigma in [(0.0, 0.1), (0.02, 0.05), (-0.01, 0.3)]:
        def density(r, mu=mu, sigma=sigma):
            return math.exp(-0.5 * ((math.log(r) - mu) / sigma) ** 2) / (
                r * sigma * math.sqrt(2 * math.pi))
        oracle = np.zeros((3, 3))
        for i in range(3):
            for j in range(3):
                a = g3.lower_edges[j] / g3.upper_edges[i]
                b = g3.upper_edges[j] / g3.lower_edges[i]
                oracle[i, j] = quad(density, a, b, limit=200)[0]
        oracle /= oracle.sum(axis=1, keepdims=True)
        m = discretize_transition(mu, sigma, g3).matrix
        worst_quad = max(worst_quad, float(np.abs(m - oracle).max()))
    assert worst_quad <= 1e-6, worst_quad
    report("transition validity",
           f"50 row-sum devs <= {worst_row:.2e} (tol 1e-9), "
           f"c=3 quadrature dev {worst_quad:.2e} <= 1e-6")


def test_fit_recovery():
    rng = np.random.default_rng(8)
    steps = rng.normal(0.001, 0.02, 100_000)
    hr = 60.0 * np.exp(np.cumsum(steps))
    mu, sigma = fit_transition([hr])
    mu_err = abs(mu - 0.001) / 0.001
    sigma_err = abs(sigma - 0.02) / 0.02
    assert mu_err <= 0.02, mu_err
    assert sigma_err <= 0.02, sigma_err
    report("fit recovery",
           f"mu rel err {mu_err:.4f}, sigma rel err {sigma_err:.4f}, both <= 0.02")


def test_clean_end_to_end(tmp_path):
    sess = tmp_path / "clean"
    assert main(["synth", "--out", str(sess), "--duration", "600", "--seed", "3"]) == 0
    emis = tmp_path / "emissions.tsv"
    trans = tmp_path / "transition.tsv"
    pred = tmp_path / "pred.csv"
    assert main(["fit-transition", str(sess), "--out", str(trans)]) == 0
    start = time.perf_counter()
    assert main(["emit", str(sess), "--out", str(emis)]) == 0
    assert main(["infer", str(sess), "--transition", str(trans),
                 "--emissions", str(emis), "--out", str(pred)]) == 0
    elapsed = time.perf_counter() - start
    rows = np.genfromtxt(pred, delimiter=",", names=True)
    from hrtrack import load_session
    truth = load_session(sess).truth_at(rows["time_s"])
    mae = float(np.abs(rows["hr_mean_bpm"] - truth).mean())
    assert mae <= 2.82, mae
    assert elapsed < 10.0, elapsed
    report("clean end-to-end",
           f"10-min session, filtered MAE {mae:.3f} <= 2.82 BPM, "
           f"emit+infer {elapsed:.2f} s < 10 s")


def test_message_passing_benefit(artifact_suite):
    arg_maes, fil_maes = [], []
    for item in artifact_suite:
        truth = item["truth"]
        arg_bpm = GRID.centers[item["emissions"].probs.argmax(axis=1)]
        arg_maes.append(np.abs(arg_bpm - truth).mean())
        fil_maes.append(np.abs(item["trace"].means - truth).mean())
    ratio = float(np.mean(fil_maes) / np.mean(arg_maes))
    assert ratio <= 0.9, ratio
    report("message-passing benefit",
           f"filtered/argmax MAE {np.mean(fil_maes):.3f}/{np.mean(arg_maes):.3f} "
           f"= {ratio:.3f} <= 0.9 over 10 seeds")


def test_viterbi_benefit(artifact_suite):
    fil_maes, vit_maes = [], []
    for item in artifact_suite:
        truth = item["truth"]
        fil_maes.append(np.abs(item["trace"].means - truth).mean())
        vit_maes.append(np.abs(item["viterbi_bpm"] - truth).mean())
    ratio = float(np.mean(vit_maes) / np.mean(fil_maes))
    assert ratio <= 1.05, ratio
    report("viterbi benefit",
           f"viterbi/filtered MAE {np.mean(vit_maes):.3f}/{np.mean(fil_maes):.3f} "
           f"= {ratio:.3f} <= 1.05 over 10 seeds")


def test_rejection_sweep(artifact_suite):
    records = suite_records(artifact_suite)
    sweep = dict(rejection_sweep(records, fractions=(0.95, 1.0), uncertainty="entropy"))
    errors = np.array([abs(r.predicted_bpm - r.truth_bpm) for r in records])
    assert sweep[1.0] == errors.mean(), (sweep[1.0], errors.mean())
    improvement = 1.0 - sweep[0.95] / sweep[1.0]
    assert improvement >= 0.05, improvement
    report("rejection sweep",
           f"95% retention improves MAE {sweep[1.0]:.3f} -> {sweep[0.95]:.3f} "
           f"({improvement:.1%} >= 5%), full fraction exact")


def test_calibration(artifact_suite):
    rng = np.random.default_rng(42)
    n = 20_000
    fine = HrGrid(1000, 30.0, 210.0)
    posts, truths = [], np.empty(n)
    for i in range(n):
        d = gaussian_label(GRID, rng.uniform(45.0, 195.0), rng.uniform(3.0, 9.0))
        posts.append(d)
        truths[i] = fine.centers[rng.choice(1000, p=upsample(d, 1000).probs)]
    curve = calibration_curve(posts, truths)
    dev = max(abs(cov - q) for q, cov in curve)
    assert dev <= 0.03, dev
    covs = [cov for _, cov in curve]
    assert all(b >= a for a, b in zip(covs, covs[1:]))
    # nondecreasing also on real filtered posteriors
    for item in artifact_suite[:2]:
        c2 = [cov for _, cov in calibration_curve(item["trace"], item["truth"])]
        assert all(b >= a for a, b in zip(c2, c2[1:]))
    report("calibration",
           f"calibrated predictor, 20k draws: max |coverage - q| {dev:.4f} <= 0.03, "
           f"coverage nondecreasing")


def test_nll_anchors():
    truths = np.linspace(40.0, 200.0, 25)
    uniform = [BinDistribution.uniform(GRID)] * truths.size
    dev = abs(nll(uniform, truths) - math.log(64))
    assert dev <= 1e-9, dev
    one_hot = [BinDistribution.one_hot(GRID, GRID.bin_index(t)) for t in truths]
    zero = nll(one_hot, truths)
    assert zero == 0.0, zero
    report("NLL anchors",
           f"uniform = ln 64 within {dev:.1e} (tol 1e-9), one-hot-at-truth = {zero}")
