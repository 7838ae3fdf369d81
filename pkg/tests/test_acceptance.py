"""Release gate for the package's user-facing guarantees.

Every test here prints exactly one `[ACCEPTANCE] <name>: PASS|FAIL` line on
the real stdout so the verdicts survive pytest's capture. The unit-test
modules cover the fine-grained behavior; this file re-checks the headline
contracts with frozen oracles and hard tolerances.
"""

import io
import json
import math
import os
import subprocess
import sys
import textwrap
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from conftest import make_bundle
from test_interchange import invalid_cases
from test_scoring import ANTIPODAL, one_scale_bundle, spread_pair, two_scale_bundles
from xferfv import (
    GaussianSummary,
    LabeledFeatureSet,
    ScoreConfig,
    SynthSpec,
    assemble_baseline_set,
    class_consistency,
    feature_variety,
    gbc,
    generate_bank,
    hyperspherical_energy,
    leep,
    logme_class_evidence,
    read_case_bundle,
    score_model,
    spd_sqrt,
    transrate,
    validate_bundle,
    w2_distance,
    weighted_kendall_tau,
    write_case_bundle,
)

EXPORTER_CLI = Path(__file__).resolve().parents[1] / "exporter" / "dist" / "cli.js"


def _say(capsys, name: str, verdict: str) -> None:
    with capsys.disabled():
        sys.stdout.write(f"\n[ACCEPTANCE] {name}: {verdict}\n")
        sys.stdout.flush()


@contextmanager
def criterion(capsys, name: str):
    try:
        yield
    except BaseException:
        _say(capsys, name, "FAIL")
        raise
    _say(capsys, name, "PASS")


def random_summary(rng, dim: int) -> GaussianSummary:
    a = rng.standard_normal((dim, dim))
    cov = a @ a.T + 0.1 * np.eye(dim)
    return GaussianSummary(
        mean=rng.standard_normal(dim), covariance=cov, sample_count=dim + 2
    )


def gauss1d(mu: float, var: float) -> GaussianSummary:
    return GaussianSummary(
        mean=np.array([mu]), covariance=np.array([[var]]), sample_count=2
    )


def test_w2_closed_forms_and_triangle_inequality(capsys):
    with criterion(capsys, "w2-closed-forms-and-triangle"):
        start = time.perf_counter()
        assert w2_distance(gauss1d(0.5, 2.0), gauss1d(0.5, 2.0)) == pytest.approx(
            0.0, abs=1e-9
        )
        # 1-D: squared distance is (mean shift)^2 + (sigma gap)^2.
        assert w2_distance(gauss1d(0.0, 1.0), gauss1d(2.0, 4.0)) == pytest.approx(
            math.sqrt(5.0), abs=1e-9
        )
        # Commuting covariances reduce to a per-axis sigma comparison.
        a = GaussianSummary(np.zeros(2), np.diag([1.0, 4.0]), 4)
        b = GaussianSummary(np.zeros(2), np.diag([4.0, 1.0]), 4)
        assert w2_distance(a, b) == pytest.approx(math.sqrt(2.0), abs=1e-9)

        rng = np.random.default_rng(7)
        for _ in range(200):
            dim = int(rng.integers(1, 17))
            x, y, z = (random_summary(rng, dim) for _ in range(3))
            assert w2_distance(x, z) <= w2_distance(x, y) + w2_distance(y, z) + 1e-6
        assert time.perf_counter() - start < 5.0


def test_spd_sqrt_reconstructs_input(capsys):
    with criterion(capsys, "spd-sqrt-reconstruction"):
        rng = np.random.default_rng(11)
        for _ in range(100):
            dim = int(rng.integers(1, 25))
            a = rng.standard_normal((dim, dim))
            spd = a @ a.T + 0.05 * np.eye(dim)
            root = spd_sqrt(spd)
            err = np.linalg.norm(root @ root - spd) / np.linalg.norm(spd)
            assert err < 1e-6
            assert np.linalg.eigvalsh(root).min() >= -1e-9


def brute_force_energy(points: np.ndarray, s: float) -> float:
    unit = points / np.linalg.norm(points, axis=1, keepdims=True)
    total = 0.0
    for i in range(len(unit)):
        for j in range(len(unit)):
            if i == j:
                continue
            d = max(float(np.linalg.norm(unit[i] - unit[j])), 1e-8)
            total += math.log(1.0 / d) if s == 0 else d ** (-s)
    return total


def test_hyperspherical_energy_matches_brute_force(capsys):
    with criterion(capsys, "hse-brute-force-and-circle"):
        rng = np.random.default_rng(23)
        for n in (2, 5, 9, 16):
            pts = rng.standard_normal((n, 4)) + 0.1
            for s in (0.0, 1.0, 2.0):
                assert hyperspherical_energy(pts, s) == pytest.approx(
                    brute_force_energy(pts, s), abs=1e-9
                )
        circle = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
        assert hyperspherical_energy(circle, 1.0) == pytest.approx(
            4.0 * math.sqrt(2.0) + 2.0, abs=1e-9
        )


def test_component_arithmetic_fixtures(capsys):
    with criterion(capsys, "component-fixtures"):
        # Three 1-D cases with equal variance: consistency is the mean
        # pairwise mean-gap, (1 + 3 + 2) / 3 = 2.
        cases = [
            one_scale_bundle("a", {1: spread_pair(0.0, 0.5)}, ANTIPODAL),
            one_scale_bundle("b", {1: spread_pair(1.0, 0.5)}, ANTIPODAL),
            one_scale_bundle("c", {1: spread_pair(3.0, 0.5)}, ANTIPODAL),
        ]
        assert class_consistency(cases, 1, ScoreConfig()) == pytest.approx(
            2.0, abs=1e-12
        )

        # Mixing an antipodal pair (energy 1) with a chord-0.5 pair
        # (energy 4): variety is (1 + 1/4) / 2 = 0.625.
        y = math.sqrt(1.0 - 0.875**2)
        mixed = [
            one_scale_bundle("a", {1: [[1.0, 0.0], [0.0, 1.0]]}, [[1.0, 0.0], [-1.0, 0.0]]),
            one_scale_bundle("b", {1: [[1.0, 0.0], [0.0, 1.0]]}, [[1.0, 0.0], [0.875, y]]),
        ]
        assert feature_variety(mixed, 1, ScoreConfig()) == pytest.approx(
            0.625, abs=1e-12
        )

        # Per-scale log ratios 1 and 3 average to a transferability of 2.
        bundles = two_scale_bundles([0.0, math.exp(-1.0)], [0.0, math.exp(-3.0)])
        score = score_model("m", bundles, ScoreConfig())
        assert score.transferability == pytest.approx(2.0, abs=1e-12)


DRIVER = textwrap.dedent(
    """
    import sys
    from pathlib import Path
    from xferfv.cli import main

    base = Path(sys.argv[1])
    assert main(["synth", "--out", str(base / "bank")]) == 0
    models = sorted(str(p) for p in (base / "bank").iterdir() if p.is_dir())
    assert main(["score", "--models", *models, "--out", str(base / "scores")]) == 0
    assert main([
        "eval",
        "--scores", str(base / "scores"),
        "--perf", str(base / "bank" / "performance.csv"),
        "--out", str(base / "report.json"),
    ]) == 0
    """
)


def test_end_to_end_synthetic_ranking(capsys, tmp_path):
    with criterion(capsys, "end-to-end-ranking"):
        script = tmp_path / "driver.py"
        script.write_text(DRIVER)
        env = dict(os.environ)
        env.update(
            OPENBLAS_NUM_THREADS="1",
            OMP_NUM_THREADS="1",
            MKL_NUM_THREADS="1",
            NUMBA_NUM_THREADS="1",
        )
        start = time.perf_counter()
        proc = subprocess.run(
            [sys.executable, str(script), str(tmp_path)],
            capture_output=True,
            text=True,
            env=env,
        )
        elapsed = time.perf_counter() - start
        assert proc.returncode == 0, proc.stderr
        report = json.loads((tmp_path / "report.json").read_text())
        assert report["weighted_tau"] == 1.0
        assert report["pearson"] >= 0.95
        assert elapsed < 60.0, f"pipeline took {elapsed:.1f}s"


def test_noisy_bank_w2_ranks_no_worse_than_kl(capsys):
    with criterion(capsys, "metric-ablation"):
        bank, records = generate_bank(SynthSpec(noise_sigma=0.5))
        performances = {r.model_id: r.dice for r in records}

        def tau(metric: str) -> float:
            estimates = {
                model_id: score_model(
                    model_id, bundles, ScoreConfig(distance_metric=metric)
                ).transferability
                for model_id, bundles in bank.items()
            }
            return weighted_kendall_tau(estimates, performances)

        assert tau("w2") >= tau("kl") - 1e-12


def test_baseline_contracts(capsys):
    with criterion(capsys, "baseline-contracts"):
        bank, _ = generate_bank(SynthSpec())
        for bundles in bank.values():
            ds = assemble_baseline_set(bundles, 1)
            classes = len(np.unique(ds.labels))
            pairs = classes * (classes - 1) // 2
            assert leep(ds) <= 0.0
            assert transrate(ds) >= -1e-9
            assert -pairs <= gbc(ds) <= 0.0

        # Uniform two-class posteriors make every per-row term log(1/2).
        hand = LabeledFeatureSet(
            features=np.zeros((2, 1)),
            labels=np.array([1, 2]),
            posteriors=np.full((2, 2), 0.5),
        )
        assert leep(hand) == pytest.approx(math.log(0.5), abs=1e-9)

        estimates = {"m1": 3.0, "m2": 1.0, "m3": 2.0}
        performances = {"m1": 3.0, "m2": 2.0, "m3": 1.0}
        assert weighted_kendall_tau(estimates, performances) == pytest.approx(
            6.0 / 11.0, abs=1e-9
        )

        rng = np.random.default_rng(31)
        for _ in range(20):
            n = int(rng.integers(4, 40))
            feats = rng.standard_normal((n, int(rng.integers(1, 8))))
            target = (rng.random(n) < 0.5).astype(float)
            if len(np.unique(target)) < 2:
                continue
            _, path = logme_class_evidence(feats, target)
            assert all(b >= a - 1e-9 for a, b in zip(path, path[1:]))


def test_interchange_round_trip_and_diagnostics(capsys, rng):
    with criterion(capsys, "interchange-round-trip"):
        for _ in range(1000):
            bundle = make_bundle(rng)
            first = io.BytesIO()
            write_case_bundle(bundle, first)
            reread = read_case_bundle(first.getvalue())
            second = io.BytesIO()
            write_case_bundle(reread, second)
            assert first.getvalue() == second.getvalue()
            assert validate_bundle(reread) == []

        seen = {}
        for bundle, expected_code in invalid_cases():
            codes = {d.code for d in validate_bundle(bundle)}
            assert expected_code in codes
            seen[expected_code] = True
        assert len(seen) == len(invalid_cases())


@pytest.mark.skipif(not EXPORTER_CLI.exists(), reason="exporter not built")
def test_exporter_bundles_feed_the_scorer(capsys, tmp_path):
    with criterion(capsys, "exporter-integration"):
        fixtures = tmp_path / "fixtures"
        proc = subprocess.run(
            ["node", str(EXPORTER_CLI), "make-fixtures", "--out", str(fixtures)],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        cases = sorted(fixtures.glob("case*.json"))
        assert len(cases) == 3
        out_dir = tmp_path / "bundles" / "toy_model"
        proc = subprocess.run(
            [
                "node",
                str(EXPORTER_CLI),
                "export",
                "--model",
                str(fixtures / "model.json"),
                "--cases",
                ",".join(str(c) for c in cases),
                "--stages",
                "stage1,stage2",
                "--patch",
                "8,8,8",
                "--stride",
                "8,8,8",
                "--out",
                str(out_dir),
            ],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        bundles = sorted(out_dir.glob("*.xfb"))
        assert len(bundles) == 3
        for path in bundles:
            assert validate_bundle(read_case_bundle(path.read_bytes())) == []

        from xferfv.cli import main

        assert main(["score", "--models", str(out_dir)]) == 0
        captured = capsys.readouterr()
        obj = json.loads(captured.out.splitlines()[-1])
        assert math.isfinite(obj["transferability"])
