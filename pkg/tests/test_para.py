from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import entropy_nats, softmax_list
from ringside.core import EnsemblePrediction, Interval, PoseSequence, ProbVector
from ringside.errors import (
    DegenerateSequence,
    DimensionMismatch,
    InvalidArgument,
    MissingJoint,
)
from ringside.para import (
    ASSIGNED,
    FLAGGED,
    JointMap,
    MotorFeatures,
    classify_para,
    decide_or_flag,
    extract_motor_features,
)

# joints: 0=shoulder, 1=hip, 2=knee, 3=ankle, 4=left marker, 5=right marker
SWEEP_MAP = JointMap(
    hip_triple=(0, 1, 2),
    knee_triple=(1, 2, 3),
    left_chain=(4,),
    right_chain=(5,),
)


def hip_sweep_pose(angles_deg: list[float]) -> PoseSequence:
    """Hip at origin, shoulder straight up; knee rotated by the given angle."""
    frames = []
    for angle in angles_deg:
        rad = math.radians(angle)
        knee = (math.sin(rad), -math.cos(rad))
        ankle = (knee[0], knee[1] - 0.5)
        frames.append(
            [
                (0.0, 1.0),          # shoulder
                (0.0, 0.0),          # hip
                knee,
                ankle,
                (0.5, 0.2),          # left marker
                (-0.5, 0.2),         # right marker (mirrored)
            ]
        )
    return PoseSequence(np.array(frames), fps=30.0)


class TestExtractMotorFeatures:
    def test_static_pose_zero_rom(self):
        pose = hip_sweep_pose([40.0, 40.0, 40.0])
        features = extract_motor_features(pose, SWEEP_MAP)
        assert features.rom_hip == pytest.approx(0.0, abs=1e-9)
        assert features.rom_knee == pytest.approx(0.0, abs=1e-9)

    def test_hip_sweep_72_degrees(self):
        # hip flexion sweeps 10 deg .. 82 deg, so range of motion is 72 deg
        pose = hip_sweep_pose([10.0, 30.0, 55.0, 82.0])
        features = extract_motor_features(pose, SWEEP_MAP)
        # the measured angle is between shoulder-up and the knee vector:
        # 180 - sweep; max-min is preserved
        assert features.rom_hip == pytest.approx(72.0, abs=1e-9)

    def test_mirrored_trajectories_symmetry_one(self):
        pose = hip_sweep_pose([10.0, 30.0])  # markers mirrored by construction
        # restrict symmetry chains to the mirrored markers with a fully
        # x-symmetric remaining body (shoulder/hip on the axis)
        joint_map = JointMap(
            hip_triple=(0, 1, 2), knee_triple=(1, 2, 3), left_chain=(4,), right_chain=(5,)
        )
        frames = pose.frames.copy()
        frames[:, 2, 0] = 0.0  # put knee and ankle on the axis too
        frames[:, 3, 0] = 0.0
        symmetric = PoseSequence(frames, fps=30.0)
        features = extract_motor_features(symmetric, joint_map)
        assert features.symmetry_score == pytest.approx(1.0, abs=1e-12)

    def test_impact_delay_from_meta(self):
        pose = hip_sweep_pose([10.0, 20.0])
        features = extract_motor_features(pose, SWEEP_MAP, meta={"impact_delay_s": "0.35"})
        assert features.impact_delay == pytest.approx(0.35)

    def test_degenerate_sequence(self):
        with pytest.raises(DegenerateSequence):
            extract_motor_features(PoseSequence(np.zeros((1, 6, 2)), fps=30.0), SWEEP_MAP)

    def test_missing_joint(self):
        pose = PoseSequence(np.zeros((3, 4, 2)), fps=30.0)
        with pytest.raises(MissingJoint):
            extract_motor_features(pose, SWEEP_MAP)  # needs joints 4 and 5

    @given(
        st.floats(-5.0, 5.0),
        st.floats(-5.0, 5.0),
        st.floats(0.1, 10.0),
    )
    def test_symmetry_invariant_to_translation_and_scale(self, dx, dy, scale):
        pose = hip_sweep_pose([10.0, 45.0, 82.0])
        base = extract_motor_features(pose, SWEEP_MAP).symmetry_score
        transformed = PoseSequence(
            pose.frames * scale + np.array([dx, dy]), fps=30.0, valid=pose.valid
        )
        moved = extract_motor_features(transformed, SWEEP_MAP).symmetry_score
        assert moved == pytest.approx(base, abs=1e-9)


class TestMotorFeatures:
    def test_validates_ranges(self):
        with pytest.raises(InvalidArgument):
            MotorFeatures(rom_hip=400.0, rom_knee=0.0, symmetry_score=0.5, impact_delay=0.0)
        with pytest.raises(InvalidArgument):
            MotorFeatures(rom_hip=10.0, rom_knee=0.0, symmetry_score=1.5, impact_delay=0.0)
        with pytest.raises(InvalidArgument):
            MotorFeatures(rom_hip=10.0, rom_knee=0.0, symmetry_score=0.5, impact_delay=-1.0)


class TestClassifyPara:
    def test_equal_scores_uniform(self):
        weights = np.ones((3, 2))
        probs = classify_para([0.5, 0.5], weights)
        assert list(probs) == pytest.approx([1 / 3] * 3, abs=1e-12)

    def test_shift_invariance(self):
        rng = np.random.default_rng(4)
        weights = rng.normal(size=(3, 4))
        features = rng.normal(size=4)
        shifted = weights + rng.normal(size=(1, 4))  # same shift on every class row
        base = classify_para(features, weights)
        moved = classify_para(features, shifted)
        assert list(moved) == pytest.approx(list(base), abs=1e-12)

    def test_fixture_matches_oracle(self):
        weights = np.array([[0.02, 1.5], [0.015, 2.0], [0.01, 0.5]])
        features = [72.0, 0.65]
        probs = classify_para(features, weights)
        scores = [sum(w * f for w, f in zip(row, features)) for row in weights.tolist()]
        assert list(probs) == pytest.approx(softmax_list(scores), abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            classify_para([1.0, 2.0, 3.0], np.ones((3, 2)))


PARA_FIXTURE_A = ProbVector([0.42, 0.39, 0.19])
PARA_FIXTURE_B = ProbVector([0.48, 0.46, 0.06])


class TestDecideOrFlag:
    def test_ambiguous_fixture_flagged_by_credal_set(self):
        decision = decide_or_flag(PARA_FIXTURE_A, entropy_threshold=2.0, theta=0.35, tau=0.5)
        assert decision.outcome == FLAGGED
        assert decision.credal_set == {0, 1}
        assert decision.assigned_class is None
        assert any("credal" in r for r in decision.flag_reasons)

    def test_confident_case_assigned(self):
        decision = decide_or_flag(
            ProbVector([1.0, 0.0, 0.0]), entropy_threshold=0.1, theta=0.35, tau=0.5
        )
        assert decision.outcome == ASSIGNED
        assert decision.assigned_class == 0
        assert decision.assigned_label == "A6"

    def test_second_fixture_flagged_despite_entropy_below_threshold(self):
        entropy = entropy_nats([0.48, 0.46, 0.06])
        assert entropy == pytest.approx(0.878, abs=1e-3)
        decision = decide_or_flag(PARA_FIXTURE_B, entropy_threshold=0.9, theta=0.35, tau=0.5)
        assert decision.entropy_nats == pytest.approx(entropy, abs=1e-12)
        assert decision.outcome == FLAGGED  # credal set {A6, A7} is not a singleton
        assert decision.credal_set == {0, 1}

    def test_low_max_prob_flags(self):
        decision = decide_or_flag(
            ProbVector([0.5, 0.3, 0.2]), entropy_threshold=5.0, theta=0.45, tau=0.6
        )
        assert decision.outcome == FLAGGED
        assert any("best probability" in r for r in decision.flag_reasons)

    def test_upper_bound_flag(self):
        bounds = [Interval(0.2, 0.55), Interval(0.1, 0.4), Interval(0.0, 0.3)]
        decision = decide_or_flag(
            ProbVector([0.9, 0.08, 0.02]),
            entropy_threshold=5.0,
            theta=0.5,
            tau=0.6,
            bounds=bounds,
        )
        assert decision.outcome == FLAGGED
        assert any("upper probability bound" in r for r in decision.flag_reasons)

    def test_ensemble_bounds_defaulted(self, uq_ensemble):
        decision = decide_or_flag(uq_ensemble, entropy_threshold=5.0, theta=0.4, tau=0.3)
        assert decision.prob_bounds is not None
        assert decision.prob_bounds[0] == Interval(0.50, 0.65)

    def test_invalid_thresholds(self):
        with pytest.raises(InvalidArgument):
            decide_or_flag(PARA_FIXTURE_A, entropy_threshold=-1.0, theta=0.35, tau=0.5)
        with pytest.raises(InvalidArgument):
            decide_or_flag(PARA_FIXTURE_A, entropy_threshold=1.0, theta=0.0, tau=0.5)
        with pytest.raises(InvalidArgument):
            decide_or_flag(PARA_FIXTURE_A, entropy_threshold=1.0, theta=0.35, tau=1.5)


@st.composite
def prob_vectors(draw):
    weights = draw(st.lists(st.floats(1e-6, 1.0), min_size=3, max_size=3))
    return ProbVector.normalized(weights)


class TestFlagMonotonicity:
    @given(
        prob_vectors(),
        st.floats(0.0, 2.0),
        st.floats(0.05, 0.95),
        st.floats(0.05, 0.95),
        st.floats(0.0, 0.5),
        st.floats(0.0, 1.0),
    )
    def test_raising_tau_or_lowering_entropy_never_unflags(
        self, p, entropy_thr, theta, tau, tau_bump, entropy_cut
    ):
        base = decide_or_flag(p, entropy_threshold=entropy_thr, theta=theta, tau=tau)
        stricter = decide_or_flag(
            p,
            entropy_threshold=entropy_thr * (1 - entropy_cut),
            theta=theta,
            tau=min(tau + tau_bump, 1.0),
        )
        if base.outcome == FLAGGED:
            assert stricter.outcome == FLAGGED

    @given(prob_vectors(), st.floats(0.1, 2.0), st.floats(0.05, 0.95), st.floats(0.05, 0.95))
    def test_assigned_implies_argmax_singleton(self, p, entropy_thr, theta, tau):
        decision = decide_or_flag(p, entropy_threshold=entropy_thr, theta=theta, tau=tau)
        if decision.outcome == ASSIGNED:
            assert decision.assigned_class == p.argmax()
            assert decision.credal_set == {p.argmax()}


class TestParaConfig:
    def test_load_and_classify(self, tmp_path):
        import json

        from ringside.para import classify_and_decide, load_para_config

        path = tmp_path / "para.json"
        path.write_text(
            json.dumps(
                {
                    "labels": ["A6", "A7", "A8"],
                    "weights": [[0.02, 1.5], [0.015, 2.0], [0.01, 0.5]],
                    "entropy_threshold": 0.9,
                    "theta": 0.35,
                    "tau": 0.5,
                }
            )
        )
        config = load_para_config(path)
        assert config.labels == ("A6", "A7", "A8")
        decision = classify_and_decide([72.0, 0.65], config)
        assert decision.labels == ("A6", "A7", "A8")
        assert decision.outcome in (ASSIGNED, FLAGGED)

    def test_load_rejects_bad_shapes(self, tmp_path):
        import json

        from ringside.para import load_para_config

        path = tmp_path / "para.json"
        path.write_text(json.dumps({"labels": ["A6"], "weights": [[1.0], [2.0]],
                                    "entropy_threshold": 1.0, "theta": 0.3, "tau": 0.5}))
        with pytest.raises(InvalidArgument):
            load_para_config(path)


class TestParaAuditEmission:
    def test_assigned_decision_becomes_final_entry(self):
        from ringside.engine import para_audit_entry

        decision = decide_or_flag(
            ProbVector([0.9, 0.08, 0.02]), entropy_threshold=1.0, theta=0.5, tau=0.6
        )
        assert decision.outcome == ASSIGNED
        entry = para_audit_entry(decision, ts_ms=1000, event_id="athlete-77")
        assert entry.decision_flow == "ai_final"
        assert entry.y_hat == "class:A6"
        assert entry.entropy_nats == pytest.approx(decision.entropy_nats)
        assert entry.p_lo == entry.p_hi == pytest.approx(0.9)

    def test_flagged_decision_defers(self):
        from ringside.engine import para_audit_entry

        decision = decide_or_flag(PARA_FIXTURE_A, entropy_threshold=2.0, theta=0.35, tau=0.5)
        entry = para_audit_entry(decision, ts_ms=2000, event_id="athlete-78")
        assert entry.decision_flow == "deferred"
        assert entry.y_hat == "flagged_for_review"

    def test_round_trips_through_audit_log(self, tmp_path):
        from ringside.audit import AuditLog
        from ringside.engine import para_audit_entry

        log = AuditLog(tmp_path / "para.jsonl")
        decision = decide_or_flag(
            ProbVector([0.9, 0.08, 0.02]), entropy_threshold=1.0, theta=0.5, tau=0.6
        )
        seq = log.append(para_audit_entry(decision, ts_ms=5, event_id="a1"))
        assert seq == 1
        assert log.verify().ok
