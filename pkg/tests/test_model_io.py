import numpy as np
import pytest

from flowfit.model_io import (
    AssignmentOptions,
    CalibrationOptions,
    LinkEdit,
    ModelLoadError,
    Scenario,
    apply_scenario,
    load_model,
    load_scenario,
    write_model,
)
from flowfit.network import free_flow_times, skim_matrix, validate
from flowfit.sample_models import eight_zone_star, synthetic_counts, toy_strata


@pytest.fixture
def toy_dir(tmp_path):
    zones, net = eight_zone_star()
    strata = toy_strata(0.7, 0.074)
    counts = synthetic_counts(zones, net, strata)
    write_model(tmp_path, zones, net, counts, strata,
                AssignmentOptions(mode="oneoff"), CalibrationOptions(seed=3))
    return tmp_path


class TestLoadModel:
    def test_toy_instance_loads_clean(self, toy_dir):
        model = load_model(toy_dir / "model.yaml")
        assert len(model.zones) == 8
        assert len(model.network.links) == 28
        assert len(model.counts) == 28
        assert validate(model.network) == []
        assert model.calibration.seed == 3
        assert model.assignment.mode == "oneoff"

    def test_roundtrip_is_identical(self, toy_dir):
        first = load_model(toy_dir / "model.yaml")
        out = toy_dir / "copy"
        write_model(out, first.zones, first.network, first.counts, first.strata,
                    first.assignment, first.calibration)
        second = load_model(out / "model.yaml")
        assert second.zones == first.zones
        assert second.network == first.network
        assert second.counts == first.counts
        assert second.strata == first.strata
        assert (out / "zones.csv").read_bytes() == (toy_dir / "zones.csv").read_bytes()
        assert (out / "links.csv").read_bytes() == (toy_dir / "links.csv").read_bytes()

    def test_missing_node_reference_names_file_row_and_node(self, toy_dir):
        links = toy_dir / "links.csv"
        rows = links.read_text().splitlines()
        rows[3] = rows[3].replace("n1", "n99")
        links.write_text("\n".join(rows) + "\n")
        with pytest.raises(ModelLoadError) as err:
            load_model(toy_dir / "model.yaml")
        assert err.value.stage == "validation"
        assert any("links.csv:4" in d and "'n99'" in d for d in err.value.diagnostics)

    def test_all_reference_errors_reported_together(self, toy_dir):
        links = toy_dir / "links.csv"
        rows = links.read_text().splitlines()
        rows[3] = rows[3].replace("n1", "n99")
        rows[7] = rows[7].replace("n1", "n98")
        links.write_text("\n".join(rows) + "\n")
        zones = toy_dir / "zones.csv"
        zones.write_text(zones.read_text().replace("Z3,Satellite 2", "Z3x,Satellite 2")
                         .replace(",n3,", ",ghost,"))
        with pytest.raises(ModelLoadError) as err:
            load_model(toy_dir / "model.yaml")
        joined = "\n".join(err.value.diagnostics)
        assert "'n99'" in joined and "'n98'" in joined and "'ghost'" in joined

    def test_parse_errors_are_aggregated_with_file_and_line(self, toy_dir):
        nodes = toy_dir / "nodes.csv"
        rows = nodes.read_text().splitlines()
        rows[2] = "n2,not_a_number,0.0"
        rows[4] = "n4,1.0"
        nodes.write_text("\n".join(rows) + "\n")
        with pytest.raises(ModelLoadError) as err:
            load_model(toy_dir / "model.yaml")
        assert err.value.stage == "parse"
        assert any("nodes.csv:3" in d for d in err.value.diagnostics)
        assert any("nodes.csv:5" in d for d in err.value.diagnostics)

    def test_jobs_derivation_applied_at_load(self, toy_dir):
        spec = toy_dir / "model.yaml"
        text = spec.read_text()
        text += (
            "derivations:\n"
            "- attribute: jobs\n"
            "  method: jobs_from_population\n"
            "  source: population\n"
            "  cutoff: 5000\n"
        )
        spec.write_text(text)
        model = load_model(spec)
        by_id = {z.zone_id: z for z in model.zones}
        # sqrt(100000^2 - 5000^2)
        assert by_id["Z1"].attributes["jobs"] == pytest.approx(99874.92178, abs=1e-4)

    def test_stratum_with_unknown_attribute_is_a_validation_error(self, toy_dir):
        spec = toy_dir / "model.yaml"
        spec.write_text(spec.read_text().replace(
            "attraction_attr: population", "attraction_attr: mystery"
        ))
        with pytest.raises(ModelLoadError) as err:
            load_model(spec)
        assert err.value.stage == "validation"
        assert any("mystery" in d for d in err.value.diagnostics)

    def test_unknown_count_link_is_a_validation_error(self, toy_dir):
        counts = toy_dir / "counts.csv"
        counts.write_text(counts.read_text() + "ghost,123\n")
        with pytest.raises(ModelLoadError) as err:
            load_model(toy_dir / "model.yaml")
        assert any("ghost" in d for d in err.value.diagnostics)

    def test_bidirectional_count_splits_between_directions(self, toy_dir):
        counts = toy_dir / "counts.csv"
        counts.write_text(
            "link_id,observed_veh24h,bidirectional\nn1_n2,10000,1\n"
        )
        model = load_model(toy_dir / "model.yaml")
        assert sorted((c.link_id, c.observed) for c in model.counts) == [
            ("n1_n2", 5000.0), ("n2_n1", 5000.0)
        ]

    def test_missing_spec_file(self, tmp_path):
        with pytest.raises(ModelLoadError) as err:
            load_model(tmp_path / "nope.yaml")
        assert err.value.stage == "parse"

    def test_blank_bpr_columns_fall_back_to_defaults(self, toy_dir):
        links = toy_dir / "links.csv"
        rows = links.read_text().splitlines()
        cells = rows[1].split(",")
        cells[5] = cells[6] = ""  # alpha1, alpha2
        rows[1] = ",".join(cells)
        links.write_text("\n".join(rows) + "\n")
        model = load_model(toy_dir / "model.yaml")
        link = model.network.links[rows[1].split(",")[0]]
        assert link.alpha1 == 0.15 and link.alpha2 == 4.0


class TestScenario:
    def test_empty_edit_list_is_identity(self, toy_dir):
        model = load_model(toy_dir / "model.yaml")
        edited = apply_scenario(model.network, Scenario("noop", []))
        assert edited == model.network
        assert edited is not model.network

    def test_base_network_never_mutated(self, toy_dir):
        model = load_model(toy_dir / "model.yaml")
        before = dict(model.network.links)
        apply_scenario(model.network, Scenario("mod", [
            LinkEdit("modify_link", "n1_n2", {"t0_min": 1.0}),
            LinkEdit("remove_link", "n2_n3", {}),
        ]))
        assert model.network.links == before
        assert model.network.links["n1_n2"].t0 == 10.0

    def test_bypass_shortens_or_preserves_all_skims(self, toy_dir):
        model = load_model(toy_dir / "model.yaml")
        edits = [
            LinkEdit("add_link", "bypass_ab", {
                "from_node": "n2", "to_node": "n5",
                "t0_min": 3.0, "capacity_veh24h": 30000.0,
            }),
            LinkEdit("add_link", "bypass_ba", {
                "from_node": "n5", "to_node": "n2",
                "t0_min": 3.0, "capacity_veh24h": 30000.0,
            }),
        ]
        edited = apply_scenario(model.network, Scenario("bypass", edits))
        before = skim_matrix(model.network, free_flow_times(model.network))
        after = skim_matrix(edited, free_flow_times(edited))
        off = ~np.eye(len(before.zone_ids), dtype=bool)
        assert (after.values[off] <= before.values[off] + 1e-12).all()
        assert after.cost("Z2", "Z5") == 3.0

    def test_removing_the_only_access_fails_validation(self, toy_dir):
        model = load_model(toy_dir / "model.yaml")
        # strip every link that leaves n2: Z2 can no longer reach anyone
        edits = [LinkEdit("remove_link", lid, {})
                 for lid, l in model.network.links.items() if l.from_node == "n2"]
        with pytest.raises(ModelLoadError) as err:
            apply_scenario(model.network, Scenario("cut", edits))
        assert err.value.stage == "validation"
        assert any("'Z2'" in d for d in err.value.diagnostics)

    def test_edit_referencing_unknown_link(self, toy_dir):
        model = load_model(toy_dir / "model.yaml")
        with pytest.raises(ModelLoadError, match="unknown link"):
            apply_scenario(model.network,
                           Scenario("bad", [LinkEdit("remove_link", "ghost", {})]))

    def test_scenario_yaml_loading(self, tmp_path):
        path = tmp_path / "scenario.yaml"
        path.write_text(
            "name: test\n"
            "edits:\n"
            "- action: modify_link\n"
            "  link_id: n1_n2\n"
            "  t0_min: 2.5\n"
        )
        scenario = load_scenario(path)
        assert scenario.name == "test"
        assert scenario.edits == [LinkEdit("modify_link", "n1_n2", {"t0_min": 2.5})]

    def test_scenario_with_unknown_action_rejected(self, tmp_path):
        path = tmp_path / "scenario.yaml"
        path.write_text("edits:\n- action: repaint_link\n  link_id: x\n")
        with pytest.raises(ModelLoadError, match="unknown action"):
            load_scenario(path)
