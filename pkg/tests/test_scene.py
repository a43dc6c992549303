import json

import numpy as np
import pytest

from roomsim.bands import N_BANDS
from roomsim.errors import (
    CalibrationError,
    ConfigurationError,
    SceneFormatError,
    ValidationError,
)
from roomsim.scene import (
    AbsorptionProfile,
    AlodPreset,
    CoupledMode,
    OutputMode,
    Pose,
    ReverbTarget,
    RoomGeometry,
    bundled_preset_names,
    calibrate_absorption,
    expand_alod_preset,
    eyring_t30,
    load_scene,
)


def room_path_length(scene):
    door = np.array(scene.apertures[0].center)
    src = np.array(scene.source.position)
    rcv = np.array(scene.receiver.position)
    return np.linalg.norm(src - door) + np.linalg.norm(door - rcv)


class TestRoomGeometry:
    def test_volume_and_surface(self):
        room = RoomGeometry(dims=(4.97, 3.78, 2.71))
        assert room.volume == pytest.approx(50.9117, abs=1e-3)
        assert room.surface_area == pytest.approx(84.998, abs=1e-3)

    def test_paper_rooms_hand_computed(self):
        kitchen = RoomGeometry(dims=(4.97, 2.00, 2.71))
        assert kitchen.volume == pytest.approx(26.94, abs=0.01)
        pub = RoomGeometry(dims=(17.76, 10.2, 2.9), volume_override=442.0)
        assert pub.box_volume == pytest.approx(525.34, abs=0.01)
        assert pub.volume == 442.0
        assert pub.surface_area == pytest.approx(524.47, abs=0.01)
        underground = RoomGeometry(dims=(120.0, 15.7, 4.16))
        assert underground.volume == pytest.approx(7837.44, abs=0.01)

    def test_zero_dimension_rejected(self):
        with pytest.raises(ValidationError):
            RoomGeometry(dims=(4.97, 0.0, 2.71))

    def test_negative_dimension_rejected(self):
        with pytest.raises(ValidationError):
            RoomGeometry(dims=(4.97, -1.0, 2.71))


class TestReverbTarget:
    def test_flat(self):
        t = ReverbTarget.flat(0.54)
        assert len(t.t30_per_band) == N_BANDS
        assert t.broadband_t30 == 0.54

    def test_broadband_outside_band_range_rejected(self):
        with pytest.raises(ValidationError):
            ReverbTarget(t30_per_band=(0.5,) * N_BANDS, broadband_t30=0.7)

    def test_nonpositive_rejected(self):
        with pytest.raises(ValidationError):
            ReverbTarget.flat(0.0)


class TestCalibrateAbsorption:
    def test_living_room_alpha(self):
        # Eyring inversion: alpha = 1 - exp(-0.161 V / (S T30))
        room = RoomGeometry(dims=(4.97, 3.78, 2.71))
        prof = calibrate_absorption(room, ReverbTarget.flat(0.54))
        assert prof.as_array()[0, 0] == pytest.approx(0.1635, abs=5e-4)

    def test_pub_alpha_with_effective_volume(self):
        room = RoomGeometry(dims=(17.76, 10.2, 2.9), volume_override=442.0)
        prof = calibrate_absorption(room, ReverbTarget.flat(0.7))
        assert prof.as_array()[0, 0] == pytest.approx(0.1762, abs=5e-4)

    def test_long_t30_limit_alpha_to_zero(self):
        room = RoomGeometry(dims=(4.97, 3.78, 2.71))
        prof = calibrate_absorption(room, ReverbTarget.flat(1e6))
        assert np.all(prof.as_array() < 1e-4)

    @pytest.mark.parametrize("t30", [0.3, 0.54, 0.7, 1.6])
    def test_forward_eyring_roundtrip(self, t30):
        room = RoomGeometry(dims=(4.97, 3.78, 2.71))
        prof = calibrate_absorption(room, ReverbTarget.flat(t30))
        back = eyring_t30(room, prof)
        assert np.allclose(back, t30, rtol=1e-9)

    def test_unreachable_target(self):
        # T30 so small the inversion saturates at alpha == 1
        room = RoomGeometry(dims=(120.0, 15.7, 4.16))
        with pytest.raises(CalibrationError):
            calibrate_absorption(room, ReverbTarget.flat(1e-4))


class TestAbsorptionProfile:
    def test_alpha_bounds(self):
        with pytest.raises(ValidationError):
            AbsorptionProfile.uniform([1.0] * N_BANDS)
        with pytest.raises(ValidationError):
            AbsorptionProfile.uniform([0.0] * N_BANDS)


class TestBundledPresets:
    def test_living_room_preset(self):
        scene = load_scene("living_room")
        assert scene.rooms["living_room"].dims == (4.97, 3.78, 2.71)
        assert scene.rooms["kitchen"].dims == (4.97, 2.00, 2.71)
        assert len(scene.apertures) == 1
        assert set(scene.apertures[0].connects) == {"living_room", "kitchen"}
        assert scene.source_room == "kitchen"
        assert scene.receiver_room == "living_room"
        # bent path through the door, from the paper's scene description
        assert room_path_length(scene) == pytest.approx(5.7, abs=1e-6)

    def test_pub_preset(self):
        scene = load_scene("pub")
        assert scene.rooms["pub"].dims == (17.76, 10.2, 2.9)
        labels = {r.label for r in scene.reflectors}
        assert labels == {"tabletop", "chalkboard"}
        d = np.linalg.norm(
            np.array(scene.source.position) - np.array(scene.receiver.position)
        )
        assert d == pytest.approx(0.97, abs=1e-9)

    def test_underground_preset(self):
        scene = load_scene("underground")
        assert scene.rooms["platform"].dims == (120.0, 15.7, 4.16)
        assert scene.coupled_volume is not None
        assert scene.coupled_volume.knee_db == -15.0
        d = np.linalg.norm(
            np.array(scene.source.position) - np.array(scene.receiver.position)
        )
        assert d == pytest.approx(6.37, abs=1e-9)

    def test_all_presets_validate(self):
        for name in bundled_preset_names():
            scene = load_scene(name)
            assert scene.targets[scene.receiver_room].broadband_t30 > 0


class TestLoadSceneErrors:
    def test_missing_file(self):
        with pytest.raises(SceneFormatError):
            load_scene("/nonexistent/scene.json")

    def test_parse_error_reports_line(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{\n  "schema_version": 1,\n  "rooms": [}\n}')
        with pytest.raises(SceneFormatError) as err:
            load_scene(bad)
        assert err.value.line == 3

    def test_zero_dim_room_rejected(self, tmp_path):
        data = {
            "schema_version": 1,
            "rooms": [{"id": "a", "dims": [4.0, 0.0, 2.5], "t30": 0.5}],
            "source": {"position": [1, 1, 1]},
            "receiver": {"position": [2, 1, 1]},
        }
        f = tmp_path / "scene.json"
        f.write_text(json.dumps(data))
        with pytest.raises(ValidationError):
            load_scene(f)

    def test_wrong_schema_version(self, tmp_path):
        f = tmp_path / "scene.json"
        f.write_text(json.dumps({"schema_version": 99, "rooms": []}))
        with pytest.raises(SceneFormatError):
            load_scene(f)

    def test_pose_outside_all_rooms(self, tmp_path):
        data = {
            "schema_version": 1,
            "rooms": [{"id": "a", "dims": [4.0, 3.0, 2.5], "t30": 0.5}],
            "source": {"position": [10, 10, 10]},
            "receiver": {"position": [2, 1, 1]},
        }
        f = tmp_path / "scene.json"
        f.write_text(json.dumps(data))
        with pytest.raises(ValidationError):
            load_scene(f)

    def test_aperture_outside_wall_rejected(self, tmp_path):
        data = {
            "schema_version": 1,
            "rooms": [
                {"id": "a", "dims": [4.0, 3.0, 2.5], "t30": 0.5},
                {"id": "b", "dims": [4.0, 2.0, 2.5], "origin": [0, 3.0, 0], "t30": 0.5},
            ],
            "apertures": [
                {"wall": "a/y+", "center": [0.3, 3.0, 1.0], "width": 0.9,
                 "height": 2.0, "connects": ["a", "b"]}
            ],
            "source": {"position": [1, 4, 1]},
            "receiver": {"position": [2, 1, 1]},
        }
        f = tmp_path / "scene.json"
        f.write_text(json.dumps(data))
        # width 0.9 around x=0.3 extends past the x=0 wall edge
        with pytest.raises(ValidationError):
            load_scene(f)


class TestExpandAlodPreset:
    def test_underground_full(self):
        scene = load_scene("underground")
        plan = expand_alod_preset(scene, AlodPreset.RAZR_FULL)
        assert plan.ism_order == 3
        assert plan.coupled_mode is CoupledMode.FULL
        assert plan.coupled_stage is not None
        assert plan.coupled_stage.knee_db == -15.0
        assert plan.jitter and plan.smearing and plan.fdn

    def test_underground_simple_differs_only_in_coupling(self):
        scene = load_scene("underground")
        full = expand_alod_preset(scene, AlodPreset.RAZR_FULL)
        simple = expand_alod_preset(scene, AlodPreset.RAZR_SIMPLE)
        assert simple.coupled_mode is CoupledMode.OFF
        assert simple.coupled_stage is None
        assert simple.ism_order == full.ism_order == 3
        assert simple.jitter == full.jitter
        assert simple.smearing == full.smearing
        assert simple.include_reflectors == full.include_reflectors

    def test_living_room_simple_is_cascade(self):
        scene = load_scene("living_room")
        plan = expand_alod_preset(scene, AlodPreset.RAZR_SIMPLE)
        assert plan.coupled_mode is CoupledMode.CASCADE

    def test_pub_simple_drops_reflectors(self):
        scene = load_scene("pub")
        full = expand_alod_preset(scene, AlodPreset.RAZR_FULL)
        simple = expand_alod_preset(scene, AlodPreset.RAZR_SIMPLE)
        assert full.include_reflectors and len(full.reflectors) == 2
        assert not simple.include_reflectors and len(simple.reflectors) == 0

    @pytest.mark.parametrize("name", ["living_room", "pub", "underground"])
    def test_plain_ism(self, name):
        plan = expand_alod_preset(load_scene(name), AlodPreset.PLAIN_ISM)
        assert plan.ism_order == 15
        assert not plan.fdn and not plan.jitter and not plan.smearing
        assert not plan.include_reflectors

    def test_first_order(self):
        plan = expand_alod_preset(load_scene("pub"), AlodPreset.RAZR_1ST_ORDER)
        assert plan.ism_order == 1
        assert plan.fdn

    def test_diotic_output_mode(self):
        plan = expand_alod_preset(load_scene("pub"), AlodPreset.DIOTIC)
        assert plan.output_mode is OutputMode.DIOTIC
        ls = expand_alod_preset(
            load_scene("pub"), AlodPreset.DIOTIC, OutputMode.LOUDSPEAKER
        )
        assert ls.output_mode is OutputMode.LOUDSPEAKER
        assert ls.front_only

    def test_simple_without_declared_feature(self, tmp_path):
        data = {
            "schema_version": 1,
            "rooms": [{"id": "a", "dims": [4.0, 3.0, 2.5], "t30": 0.5}],
            "source": {"position": [1, 1, 1]},
            "receiver": {"position": [2, 1, 1]},
        }
        f = tmp_path / "scene.json"
        f.write_text(json.dumps(data))
        scene = load_scene(f)
        with pytest.raises(ConfigurationError):
            expand_alod_preset(scene, AlodPreset.RAZR_SIMPLE)

    def test_deterministic(self):
        scene = load_scene("underground")
        a = expand_alod_preset(scene, AlodPreset.RAZR_FULL, seed=5)
        b = expand_alod_preset(scene, AlodPreset.RAZR_FULL, seed=5)
        assert a == b
        assert a.digest() == b.digest()

    def test_digest_changes_with_seed(self):
        scene = load_scene("underground")
        a = expand_alod_preset(scene, AlodPreset.RAZR_FULL, seed=5)
        b = expand_alod_preset(scene, AlodPreset.RAZR_FULL, seed=6)
        assert a.digest() != b.digest()


class TestPose:
    def test_yaw_rotation(self):
        pose = Pose(position=(0, 0, 0), yaw_deg=90.0)
        head = pose.to_head_frame(np.array([0.0, 1.0, 0.0]))
        assert np.allclose(head, [1.0, 0.0, 0.0], atol=1e-12)

    def test_pitch_rotation(self):
        pose = Pose(position=(0, 0, 0), pitch_deg=90.0)
        head = pose.to_head_frame(np.array([0.0, 0.0, 1.0]))
        assert np.allclose(head, [1.0, 0.0, 0.0], atol=1e-12)

    def test_alod_parse(self):
        assert AlodPreset.parse("razr") is AlodPreset.RAZR_FULL
        assert AlodPreset.parse("ism") is AlodPreset.PLAIN_ISM
        with pytest.raises(ValidationError):
            AlodPreset.parse("nope")
