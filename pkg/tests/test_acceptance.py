"""Acceptance gate: eight numbered criteria, one pass/fail line each.

Every criterion runs on the fixture landmark backend; the only network
traffic is a local stub HTTP server. Budgets are asserted, not advisory.
"""

from __future__ import annotations

import dataclasses
import random
import time
from contextlib import contextmanager

import numpy as np
import pytest

from bladerunner.analyzer import (
    IOARecord,
    aggregate,
    analyze_sample,
    failure_record,
    read_csv,
    read_goalposts,
    write_csv,
    write_goalposts,
)
from bladerunner.cli import EX_OK, EX_SYNTHETIC_FOUND, main
from bladerunner.detector import Classification, detect
from bladerunner.errors import MalformedCsv
from bladerunner.geometry import (
    EyeSide,
    contains,
    eye_box,
    eye_center,
    layout_model,
)
from bladerunner.ingest import ImageSample, LadderScheme, ResolutionLadder, SourceKind, build_ladder
from bladerunner.landmarks import FaceRect, FixtureBackend, LandmarkSet

from facegen import (
    EYE_HALF_H,
    EYE_HALF_W,
    fixture_face,
    jittered,
    jpeg_bytes,
    thirds_centers,
    write_fixture_json,
    write_gray_png,
)


@contextmanager
def criterion(number: int, name: str, budget_s: float):
    start = time.monotonic()
    try:
        yield
        elapsed = time.monotonic() - start
        assert elapsed < budget_s, (
            f"criterion {number} took {elapsed:.2f}s, budget {budget_s}s"
        )
    except BaseException:
        print(f"[criterion {number}] {name}: FAIL")
        raise
    print(f"[criterion {number}] {name}: PASS ({elapsed:.2f}s)")


def blank_sample(width: int, height: int, sample_id: str = "probe.png") -> ImageSample:
    return ImageSample(
        sample_id=sample_id,
        source=SourceKind.FIXTURE,
        pixel_data=np.full((height, width), 127, dtype=np.uint8),
    )


def quad_landmarks(left_quad, right_quad) -> LandmarkSet:
    """68 points with arbitrary values planted at the two cited quads."""
    pts = [(5.0, 5.0)] * 68
    pts[36], pts[37], pts[39], pts[40] = left_quad
    pts[38], pts[41] = (-50.0, -50.0), (-60.0, -60.0)
    pts[42], pts[43], pts[45], pts[46] = right_quad
    pts[44], pts[47] = (-70.0, -70.0), (-80.0, -80.0)
    return LandmarkSet(
        points=tuple(pts),
        face=FaceRect(0, 0, 10, 10),
        image_width=1000,
        image_height=1000,
    )


def table_from_corpus(faces_by_id, width, height, description):
    """Analyze planted faces at native resolution and aggregate."""
    backend = FixtureBackend(samples={k: [f] for k, f in faces_by_id.items()})
    ladder = ResolutionLadder(
        base_width=width, base_height=height,
        scheme=LadderScheme.BASE2, rungs=((width, height),),
    )
    records = []
    for sample_id in faces_by_id:
        records.extend(analyze_sample(blank_sample(width, height, sample_id), ladder, backend))
    return aggregate(records, corpus_description=description)


def test_criterion_1_geometry_oracle_equivalence():
    with criterion(1, "geometry oracle equivalence", 5.0):
        rng = random.Random(1)
        for _ in range(1000):
            left_quad = [(rng.uniform(0, 900), rng.uniform(0, 900)) for _ in range(4)]
            right_quad = [(rng.uniform(0, 900), rng.uniform(0, 900)) for _ in range(4)]
            lms = quad_landmarks(left_quad, right_quad)
            for side, quad in ((EyeSide.LEFT, left_quad), (EyeSide.RIGHT, right_quad)):
                xs = [p[0] for p in quad]
                ys = [p[1] for p in quad]
                center = eye_center(lms, side)
                assert center == (sum(xs) / 4.0, sum(ys) / 4.0)
                box = eye_box(lms, side)
                assert (box.min_x, box.min_y, box.max_x, box.max_y) == (
                    min(xs), min(ys), max(xs), max(ys),
                )
                assert contains(box, center)


def test_criterion_2_thirds_sum_identity():
    with criterion(2, "thirds/sum identity", 1.0):
        rng = random.Random(2)
        for _ in range(50):
            width = rng.randrange(50, 4097)
            height = rng.randrange(50, 4097)
            model = layout_model(width, height)
            assert model.predicted_left[0] + model.predicted_right[0] == width
            assert 0 < model.predicted_left[1] < height / 2
            assert model.predicted_left[1] == model.predicted_right[1]


def test_criterion_3_scaling_law():
    with criterion(3, "scaling law 1024 to 512", 30.0):
        rng = random.Random(3)
        left_1024, right_1024 = thirds_centers(1024, 1024)
        backend = FixtureBackend(
            samples={
                f"c{i:02d}.png": [
                    fixture_face(
                        jittered(rng, left_1024, 2.0),
                        jittered(rng, right_1024, 2.0),
                        1024, 1024,
                    )
                ]
                for i in range(12)
            },
            frame=(1024, 1024),
        )
        ladder = build_ladder(1024, 1024, LadderScheme.BASE2)
        records = []
        for i in range(12):
            sample = blank_sample(1024, 1024, f"c{i:02d}.png")
            records.extend(analyze_sample(sample, ladder, backend))
        table = aggregate(records, corpus_description="scaling-law corpus")

        full = table.entries[(1024, 1024)]
        half = table.entries[(512, 512)]
        assert full.n_samples == half.n_samples == 12
        pairs = (
            (half.left_mean, full.left_mean),
            (half.right_mean, full.right_mean),
        )
        for measured, reference in pairs:
            assert abs(measured[0] - reference[0] * 0.5) <= 2.0
            assert abs(measured[1] - reference[1] * 0.5) <= 2.0


def test_criterion_4_detection_and_false_positive_rates():
    with criterion(4, "detection/false-positive rates", 60.0):
        width = height = 256
        left_gp, right_gp = thirds_centers(width, height)

        train_rng = random.Random(11)
        training = {
            f"train{i:02d}.png": fixture_face(
                jittered(train_rng, left_gp, 2.0),
                jittered(train_rng, right_gp, 2.0),
                width, height,
            )
            for i in range(30)
        }
        table = table_from_corpus(training, width, height, "training corpus")
        entry = table.entries[(width, height)]
        tol = entry.tolerance_px

        syn_rng = random.Random(12)
        synthetic = {
            f"syn{i:03d}.png": fixture_face(
                jittered(syn_rng, left_gp, 2.0),
                jittered(syn_rng, right_gp, 2.0),
                width, height,
            )
            for i in range(200)
        }

        # authentic eye positions are sampled away from both goal-post
        # neighborhoods (window = eye half extent + tolerance + 2 buffer)
        auth_rng = random.Random(13)

        def away_from(mean, x_lo, x_hi):
            wx = EYE_HALF_W + tol + 2.0
            wy = EYE_HALF_H + tol + 2.0
            while True:
                x = auth_rng.uniform(x_lo, x_hi)
                y = auth_rng.uniform(35.0, 215.0)
                if abs(x - mean[0]) > wx or abs(y - mean[1]) > wy:
                    return (x, y)

        authentic = {
            f"auth{i:03d}.png": fixture_face(
                away_from(entry.left_mean, 20.0, 120.0),
                away_from(entry.right_mean, 136.0, 236.0),
                width, height,
            )
            for i in range(200)
        }

        def rate(faces_by_id):
            backend = FixtureBackend(samples={k: [f] for k, f in faces_by_id.items()})
            flagged = 0
            for sample_id in faces_by_id:
                verdict = detect(blank_sample(width, height, sample_id), table, backend)
                assert verdict.record.landmark_ok  # rates must not hide misses
                if verdict.classification == Classification.SYNTHETIC_LIKELY:
                    flagged += 1
            return flagged / len(faces_by_id)

        detection_rate = rate(synthetic)
        false_positive_rate = rate(authentic)
        assert detection_rate >= 0.95, f"detection rate {detection_rate:.3f}"
        assert false_positive_rate <= 0.05, f"false positive rate {false_positive_rate:.3f}"


def test_criterion_5_true_true_rule():
    with criterion(5, "True-True rule conformance", 5.0):
        width = height = 256
        left_gp, right_gp = thirds_centers(width, height)
        faces = {}
        expected = {}
        for left_is_hit in (True, False):
            for right_is_hit in (True, False):
                sample_id = f"case_{int(left_is_hit)}{int(right_is_hit)}.png"
                left = left_gp if left_is_hit else (left_gp[0] + 40.0, left_gp[1])
                right = right_gp if right_is_hit else (right_gp[0] + 40.0, right_gp[1])
                faces[sample_id] = fixture_face(left, right, width, height)
                expected[sample_id] = (left_is_hit, right_is_hit)
        table = table_from_corpus(
            {"ref.png": fixture_face(left_gp, right_gp, width, height)},
            width, height, "sweep reference",
        )
        backend = FixtureBackend(samples={k: [f] for k, f in faces.items()})
        for sample_id, (left_is_hit, right_is_hit) in expected.items():
            verdict = detect(blank_sample(width, height, sample_id), table, backend)
            assert verdict.left_hit == left_is_hit
            assert verdict.right_hit == right_is_hit
            should_flag = left_is_hit and right_is_hit
            assert (verdict.classification == Classification.SYNTHETIC_LIKELY) == should_flag


def test_criterion_6_round_trip_fidelity(tmp_path):
    with criterion(6, "artifact round-trip fidelity", 5.0):
        records = []
        for i in range(5):
            lx, ly = 341.0 + i / 3.0, 479.5 + i / 7.0
            rx, ry = 682.0 - i / 3.0, 480.5 - i / 7.0
            records.append(
                IOARecord(
                    sample_id=f"s{i}.png@1024x1024",
                    source="local_file",
                    width=1024, height=1024,
                    left_eye_x=lx, left_eye_y=ly,
                    right_eye_x=rx, right_eye_y=ry,
                    interocular=float(np.hypot(rx - lx, ry - ly)),
                    face_count=1, multi_face=False, landmark_ok=True,
                    pose_label=None, error=None,
                )
            )
        records.append(failure_record("bad.png", 0, 0, "ImageDecodeError"))

        first_csv = tmp_path / "first.csv"
        second_csv = tmp_path / "second.csv"
        write_csv(records, first_csv)
        write_csv(read_csv(first_csv), second_csv)
        assert first_csv.read_bytes() == second_csv.read_bytes()

        table = aggregate(
            records, corpus_description="round trip",
            created_at="2026-02-03T04:05:06+00:00",
        )
        first_gp = tmp_path / "first.json"
        second_gp = tmp_path / "second.json"
        write_goalposts(table, first_gp)
        write_goalposts(read_goalposts(first_gp), second_gp)
        assert first_gp.read_bytes() == second_gp.read_bytes()

        lines = first_csv.read_text(encoding="utf-8").splitlines()
        doubled = [lines[0], lines[1], lines[0], *lines[2:]]
        dup_path = tmp_path / "dup_header.csv"
        dup_path.write_text("\n".join(doubled) + "\n", encoding="utf-8")
        with pytest.raises(MalformedCsv):
            read_csv(dup_path)


def test_criterion_7_tolerance_monotonicity():
    with criterion(7, "tolerance monotonicity", 10.0):
        width = height = 256
        left_gp, right_gp = thirds_centers(width, height)
        reference = {"ref.png": fixture_face(left_gp, right_gp, width, height)}
        base = table_from_corpus(reference, width, height, "mono")
        entry = base.entries[(width, height)]
        tables = {
            tol: dataclasses.replace(
                base,
                entries={(width, height): dataclasses.replace(entry, tolerance_px=tol)},
            )
            for tol in (0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0)
        }
        rng = random.Random(7)
        for trial in range(100):
            dx, dy = rng.uniform(-30, 30), rng.uniform(-15, 15)
            face = fixture_face(
                (left_gp[0] + dx, left_gp[1] + dy),
                (right_gp[0] - dx, right_gp[1] + dy),
                width, height,
            )
            backend = FixtureBackend(samples={"probe.png": [face]})
            hits = []
            for tol in sorted(tables):
                verdict = detect(blank_sample(width, height), tables[tol], backend)
                hits.append((verdict.left_hit, verdict.right_hit))
            for (l_lo, r_lo), (l_hi, r_hi) in zip(hits, hits[1:]):
                assert not l_lo or l_hi
                assert not r_lo or r_hi


def test_criterion_8_pipeline_determinism(tmp_path, stub_server):
    with criterion(8, "end-to-end determinism and rate limit", 60.0):
        left, right = thirds_centers(128, 128)
        corpus = tmp_path / "corpus"
        corpus.mkdir()
        for i in range(6):
            write_gray_png(corpus / f"img{i}.png", 128, 128)
        backend_json = write_fixture_json(
            tmp_path / "backend.json",
            faces=[fixture_face(left, right, 128, 128)],
            frame=(128, 128),
        )
        csv_path = tmp_path / "m.csv"
        gp_path = tmp_path / "gp.json"

        def analyze_once():
            code = main(
                [
                    "analyze",
                    "--input", str(corpus),
                    "--out-csv", str(csv_path),
                    "--out-goalposts", str(gp_path),
                    "--backend", f"fixture:{backend_json}",
                ]
            )
            return code, csv_path.read_bytes()

        first = analyze_once()
        second = analyze_once()
        assert first[0] == second[0] == EX_OK
        assert first[1] == second[1]

        verdict_csv = tmp_path / "v.csv"

        def detect_once():
            code = main(
                [
                    "detect",
                    "--input", str(corpus),
                    "--goalposts", str(gp_path),
                    "--out-csv", str(verdict_csv),
                    "--backend", f"fixture:{backend_json}",
                ]
            )
            return code, verdict_csv.read_bytes()

        d_first = detect_once()
        d_second = detect_once()
        assert d_first[0] == d_second[0] == EX_SYNTHETIC_FOUND
        assert d_first[1] == d_second[1]

        server = stub_server([(200, jpeg_bytes(i)) for i in range(4)])
        interval_ms = 200
        code = main(
            [
                "fetch",
                "--source", server.url,
                "--count", "4",
                "--out", str(tmp_path / "fetched"),
                "--min-interval", str(interval_ms),
            ]
        )
        assert code == EX_OK
        assert len(server.arrivals) == 4
        gaps = [b - a for a, b in zip(server.arrivals, server.arrivals[1:])]
        # arrivals include loopback jitter; allow 10 ms of slack
        assert all(gap >= interval_ms / 1000 - 0.010 for gap in gaps), gaps
