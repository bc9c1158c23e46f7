"""Parameter record validation."""

import dataclasses

import pytest

from woodleaf.errors import ParameterError
from woodleaf.params import (PipelineParams, ScanConfig, params_from_mapping,
                             validate_params)


class TestScanConfig:
    def test_defaults(self):
        scan = ScanConfig(angular_step=3.49e-4)
        assert scan.angular_step == pytest.approx(3.49e-4)
        assert scan.scanner_position == (0.0, 0.0, 0.0)

    def test_is_frozen(self):
        scan = ScanConfig(angular_step=1e-3)
        with pytest.raises(dataclasses.FrozenInstanceError):
            scan.angular_step = 2e-3

    @pytest.mark.parametrize("step", [0.0, -1e-4, float("nan"), float("inf")])
    def test_rejects_bad_step(self, step):
        with pytest.raises(ParameterError, match="angular_step"):
            ScanConfig(angular_step=step)

    def test_rejects_bad_position(self):
        with pytest.raises(ParameterError, match="scanner_position"):
            ScanConfig(angular_step=1e-3, scanner_position=(0.0, float("nan"), 0.0))
        with pytest.raises((ParameterError, TypeError)):
            ScanConfig(angular_step=1e-3, scanner_position=(0.0, 1.0))


class TestPipelineParams:
    def test_defaults_are_valid(self):
        params = PipelineParams()
        assert validate_params(params) is params
        assert params.n_seeds == 1000
        assert params.sphere_radius == 0.03
        assert params.k_neighbors == 8
        assert params.neighbor_ratio_threshold == 1.71
        assert params.voxel_divisions == 100
        assert params.voxel_ratio_threshold == 0.1
        assert params.sd1 == 2.0
        assert params.sd2 == 6.0
        assert params.height_fraction == pytest.approx(1.0 / 3.0)

    @pytest.mark.parametrize("field,value", [
        ("n_seeds", 0),
        ("n_seeds", -5),
        ("sphere_radius", 0.0),
        ("sphere_radius", -0.03),
        ("k_neighbors", 0),
        ("neighbor_ratio_threshold", 0.0),
        ("voxel_divisions", 0),
        ("voxel_ratio_threshold", -0.1),
        ("sd1", 0.0),
        ("sd2", -6.0),
        ("height_fraction", 0.0),
        ("height_fraction", 1.0),
        ("height_fraction", float("nan")),
    ])
    def test_rejects_out_of_range(self, field, value):
        params = dataclasses.replace(PipelineParams(), **{field: value})
        with pytest.raises(ParameterError, match=field):
            validate_params(params)

    def test_reports_every_violation_at_once(self):
        params = dataclasses.replace(PipelineParams(), n_seeds=0,
                                     sphere_radius=-1.0, height_fraction=2.0)
        with pytest.raises(ParameterError) as excinfo:
            validate_params(params)
        message = str(excinfo.value)
        assert "n_seeds" in message
        assert "sphere_radius" in message
        assert "height_fraction" in message


class TestParamsFromMapping:
    def test_none_values_keep_defaults(self):
        params = params_from_mapping({"n_seeds": None, "sd1": 3.5})
        assert params.n_seeds == 1000
        assert params.sd1 == 3.5

    def test_unknown_name_rejected(self):
        with pytest.raises(ParameterError, match="unknown"):
            params_from_mapping({"spheres": 10})
