import json
import os

from vidprint.cli import main
from vidprint.encoder import load_model
from vidprint.ingestion import load_manifest, parse_binned_csv


def _base_config(tmp_path, **overrides):
    cfg = {
        "seed": 21,
        "out_dir": str(tmp_path / "out"),
        "synthetic": {
            "n_classes": 8,
            "trials_per_class": 2,
            "duration_s": 120.0,
            "preset": "easy-pair",
        },
        "preprocess": {"bin_s": 10.0, "duration_s": 120.0},
        "encoder": {"arch": "MLP", "embedding_dim": 16, "epochs": 1, "batch_size": 64},
        "classifier": {"kind": "KNN1", "hidden": 16, "epochs": 5},
        "evaluation": {"train_platform": "P1", "test_platform": "P2", "n_classify": 4},
    }
    cfg.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return str(path), cfg


class TestSynthCommand:
    def test_writes_loadable_manifest(self, tmp_path):
        cfg_path, cfg = _base_config(tmp_path)
        assert main(["synth", "--config", cfg_path]) == 0
        ds = load_manifest(os.path.join(cfg["out_dir"], "manifest.json"))
        assert len(ds) == 8 * 2 * 2 + 8
        assert ds.platform_list == ["P1", "P2", "VBR"]

    def test_binned_files_parse(self, tmp_path):
        cfg_path, cfg = _base_config(tmp_path)
        main(["synth", "--config", cfg_path])
        fv = parse_binned_csv(os.path.join(cfg["out_dir"], "data", "P1", "v000_t00.csv"))
        assert fv.platform == "P1"
        assert fv.bin_s == 1.0

    def test_every_artifact_carries_provenance(self, tmp_path):
        cfg_path, cfg = _base_config(tmp_path)
        main(["synth", "--config", cfg_path])
        main(["train", "--config", cfg_path])
        data_head = (tmp_path / "out" / "data" / "P1" / "v000_t00.csv").read_text().splitlines()[0]
        assert data_head.startswith("# config_sha256=")
        model_doc = json.loads((tmp_path / "out" / "model.json").read_text())
        assert "config_sha256" in model_doc["provenance"]
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert "config_sha256" in manifest["provenance"]

    def test_eval_from_written_manifest(self, tmp_path):
        cfg_path, cfg = _base_config(tmp_path)
        main(["synth", "--config", cfg_path])
        man = os.path.join(cfg["out_dir"], "manifest.json")
        cfg2 = dict(cfg)
        del cfg2["synthetic"]
        cfg2["manifest"] = man
        cfg2["out_dir"] = str(tmp_path / "out2")
        cfg2_path = tmp_path / "cfg2.json"
        cfg2_path.write_text(json.dumps(cfg2))
        assert main(["eval", "--config", str(cfg2_path), "--mode", "closed"]) == 0
        report = json.loads((tmp_path / "out2" / "closed_report.json").read_text())
        assert 0.0 <= report["accuracy_mean"] <= 1.0


class TestTrainEmbedCommands:
    def test_train_writes_model_and_history(self, tmp_path):
        cfg_path, cfg = _base_config(tmp_path)
        assert main(["train", "--config", cfg_path]) == 0
        model = load_model(os.path.join(cfg["out_dir"], "model.json"))
        assert model.embedding_dim == 16
        history = (tmp_path / "out" / "loss_history.csv").read_text().splitlines()
        assert history[1] == "epoch,mean_loss"
        assert len(history) == 3  # provenance + header + 1 epoch

    def test_embed_exports_rows(self, tmp_path):
        cfg_path, cfg = _base_config(tmp_path)
        main(["train", "--config", cfg_path])
        cfg["embed"] = {
            "model": os.path.join(cfg["out_dir"], "model.json"),
            "platforms": ["P1", "P2"],
        }
        cfg_path2 = tmp_path / "cfg_embed.json"
        cfg_path2.write_text(json.dumps(cfg))
        assert main(["embed", "--config", str(cfg_path2)]) == 0
        lines = (tmp_path / "out" / "embeddings.csv").read_text().splitlines()
        header = lines[1].split(",")
        assert header[:3] == ["platform", "video_id", "trial"]
        assert len(header) == 3 + 16
        assert len(lines) == 2 + 8 * 2 * 2

    def test_missing_model_is_data_error(self, tmp_path):
        cfg_path, cfg = _base_config(tmp_path, embed={"model": str(tmp_path / "nope.json")})
        assert main(["embed", "--config", cfg_path]) == 1


class TestEvalCommand:
    def test_closed_smoke_and_outputs(self, tmp_path):
        cfg_path, cfg = _base_config(tmp_path)
        assert main(["eval", "--config", cfg_path, "--mode", "closed"]) == 0
        report = json.loads((tmp_path / "out" / "closed_report.json").read_text())
        assert len(report["folds"]) == 2
        assert "config_sha256" in report["provenance"]
        csv_lines = (tmp_path / "out" / "closed_folds.csv").read_text().splitlines()
        assert len(csv_lines) == 2 + 2

    def test_rerun_is_byte_identical_at_any_jobs(self, tmp_path):
        cfg_path, cfg = _base_config(tmp_path)
        report_path = tmp_path / "out" / "closed_report.json"
        assert main(["eval", "--config", cfg_path, "--mode", "closed"]) == 0
        first = report_path.read_bytes()
        assert main(["eval", "--config", cfg_path, "--mode", "closed"]) == 0
        assert report_path.read_bytes() == first
        assert main(["eval", "--config", cfg_path, "--mode", "closed", "--jobs", "2"]) == 0
        assert report_path.read_bytes() == first

    def test_grid_heatmap_shape(self, tmp_path):
        cfg_path, cfg = _base_config(tmp_path, evaluation={"n_classify": 4, "n_folds": 1})
        assert main(["eval", "--config", cfg_path, "--mode", "grid"]) == 0
        lines = (tmp_path / "out" / "grid_embedding.csv").read_text().splitlines()
        header = lines[1].split(",")
        assert header == ["test_platform", "P1", "P2", "VBR"]  # N+1 training inputs
        assert len(lines) == 2 + 2  # N testing platforms

    def test_open_mode_outputs_curve(self, tmp_path):
        cfg_path, cfg = _base_config(
            tmp_path,
            evaluation={
                "train_platform": "P1", "test_platform": "P2",
                "n_classify": 4, "threshold": 0.8, "n_folds": 1,
            },
        )
        assert main(["eval", "--config", cfg_path, "--mode", "open"]) == 0
        lines = (tmp_path / "out" / "threshold_curve.csv").read_text().splitlines()
        assert len(lines) == 2 + 21
        report = json.loads((tmp_path / "out" / "open_report.json").read_text())
        assert "best_precision_threshold" in report

    def test_sweep_mode(self, tmp_path):
        cfg_path, cfg = _base_config(
            tmp_path,
            evaluation={
                "train_platform": "P1", "test_platform": "P2", "n_classify": 4,
                "sweep_axis": "trials_per_class", "sweep_values": [1, 2], "n_folds": 1,
            },
        )
        assert main(["eval", "--config", cfg_path, "--mode", "sweep"]) == 0
        rows = json.loads((tmp_path / "out" / "sweep_report.json").read_text())["rows"]
        assert [r["value"] for r in rows] == [1, 2]

    def test_binary_mode(self, tmp_path):
        cfg_path, cfg = _base_config(
            tmp_path,
            evaluation={
                "train_platform": "P1", "test_platform": "P2", "n_classify": 4,
                "n_folds": 1, "binary": {"epochs": 3, "hidden": 16},
            },
        )
        assert main(["eval", "--config", cfg_path, "--mode", "binary"]) == 0
        report = json.loads((tmp_path / "out" / "binary_report.json").read_text())
        assert 0.0 <= report["raw_accuracy_mean"] <= 1.0
        assert 0.0 <= report["embedding_accuracy_mean"] <= 1.0


class TestConfigValidation:
    def test_both_sources_rejected(self, tmp_path):
        cfg_path, _ = _base_config(tmp_path, manifest="something.json")
        assert main(["eval", "--config", cfg_path]) == 2

    def test_no_source_rejected(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"seed": 1}))
        assert main(["eval", "--config", str(path)]) == 2

    def test_missing_seed_rejected(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"synthetic": {"n_classes": 4, "trials_per_class": 1}}))
        assert main(["eval", "--config", str(path)]) == 2

    def test_seed_flag_satisfies_requirement(self, tmp_path):
        cfg_path, cfg = _base_config(tmp_path)
        raw = json.loads(open(cfg_path).read())
        del raw["seed"]
        path2 = tmp_path / "noseed.json"
        path2.write_text(json.dumps(raw))
        assert main(["synth", "--config", str(path2), "--seed", "3",
                     "--out", str(tmp_path / "o3")]) == 0

    def test_unknown_platform_rejected(self, tmp_path):
        cfg_path, _ = _base_config(
            tmp_path, evaluation={"train_platform": "P9", "test_platform": "P2", "n_classify": 4}
        )
        assert main(["eval", "--config", cfg_path, "--mode", "closed"]) == 2

    def test_missing_config_file(self, tmp_path):
        assert main(["eval", "--config", str(tmp_path / "none.json")]) == 2

    def test_bad_preset_rejected(self, tmp_path):
        cfg_path, _ = _base_config(tmp_path, synthetic={"preset": "bogus"})
        assert main(["synth", "--config", cfg_path]) == 2

    def test_seed_override_changes_output(self, tmp_path):
        cfg_path, cfg = _base_config(tmp_path)
        main(["synth", "--config", cfg_path, "--out", str(tmp_path / "a")])
        main(["synth", "--config", cfg_path, "--seed", "99", "--out", str(tmp_path / "b")])
        a = (tmp_path / "a" / "data" / "P1" / "v000_t00.csv").read_text()
        b = (tmp_path / "b" / "data" / "P1" / "v000_t00.csv").read_text()
        assert a != b


class TestPacketLogEndToEnd:
    def test_eval_from_packet_log_manifest(self, tmp_path):
        # two platforms with different delivery cadences, four videos, two
        # trials each; raw packet logs all the way through a closed-set eval
        import numpy as np

        rng = np.random.default_rng(0)
        platforms = {"A": 5.0, "B": 8.0}
        man = {"platforms": {}}
        for platform, cadence in platforms.items():
            man["platforms"][platform] = {}
            for v in range(4):
                entries = []
                for t in range(2):
                    rate = rng.integers(3, 9, size=12)  # per-segment packets
                    lines = []
                    clock = 0.0
                    for seg, n_pkts in enumerate(rate):
                        base = seg * cadence
                        for k in range(int(n_pkts)):
                            lines.append(f"{base + 0.01 * k:.3f},D,1400")
                        lines.append(f"{base + 0.5:.3f},U,60")
                    rel = f"{platform}_v{v}_t{t}.csv"
                    (tmp_path / rel).write_text("\n".join(lines) + "\n")
                    entries.append({"path": rel, "kind": "packet_log"})
                man["platforms"][platform][f"v{v}"] = entries
        man_path = tmp_path / "manifest.json"
        man_path.write_text(json.dumps(man))

        cfg = {
            "seed": 5,
            "out_dir": str(tmp_path / "out"),
            "manifest": str(man_path),
            "preprocess": {"bin_s": 10.0, "duration_s": 120.0},
            "encoder": {"arch": "MLP", "embedding_dim": 8, "epochs": 1, "batch_size": 32},
            "classifier": {"kind": "KNN1"},
            "evaluation": {"train_platform": "A", "test_platform": "B", "n_classify": 2},
        }
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        assert main(["eval", "--config", str(cfg_path), "--mode", "closed"]) == 0
        report = json.loads((tmp_path / "out" / "closed_report.json").read_text())
        assert len(report["folds"]) == 2
