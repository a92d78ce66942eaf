//! End-to-end runner and CLI checks: artifact layout, determinism,
//! fail-fast validation, and the few-shot downsampling arithmetic as seen
//! from the outside.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use tsforge::runner::run_from_path;
use tsforge::synth::{gen_synth, SynthSpec};

fn work_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("tsforge_pipe_{name}_{}", std::process::id()));
    fs::remove_dir_all(&dir).ok();
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn small_config(mode_lines: &str) -> String {
    format!(
        r#"seed = 7
output_dir = "out"

[[dataset]]
id = "alpha"
path = "alpha.csv"

[prompt]
mode = "ts_prompt"

[tokenizer]
kind = "linear"
patch_len = 8
stride = 4

[backbone]
num_layers = 1
model_dim = 8
num_heads = 2
ff_dim = 16
lookback = 16

[train]
learning_rate = 0.001
epochs = 1
grad_accum_steps = 1
batch_size = 8

{mode_lines}
"#
    )
}

fn write_fixture(dir: &Path, name: &str, seed: u64) {
    let spec = SynthSpec {
        length: 600,
        seed,
        ..SynthSpec::default()
    };
    gen_synth(&spec, dir.join(name)).unwrap();
}

#[test]
fn run_writes_every_artifact_and_is_byte_deterministic() {
    let dir = work_dir("determinism");
    write_fixture(&dir, "alpha.csv", 3);
    let cfg_path = dir.join("run.toml");
    fs::write(
        &cfg_path,
        small_config("[experiment]\nmode = \"standard\"\nhorizons = [4]\n"),
    )
    .unwrap();

    let s1 = run_from_path(&cfg_path, None, Some(dir.join("out1")), 1).unwrap();
    let s2 = run_from_path(&cfg_path, None, Some(dir.join("out2")), 1).unwrap();

    for summary in [&s1, &s2] {
        assert!(summary.results_csv.is_file());
        assert!(summary.report_md.is_file());
        assert!(summary.report_json.is_file());
        assert!(summary.manifest_json.is_file());
        assert!(summary.out_dir.join("checkpoints/h4.ckpt").is_file());
        assert!(summary.out_dir.join("train_h4.csv").is_file());
    }
    let csv1 = fs::read(&s1.results_csv).unwrap();
    let csv2 = fs::read(&s2.results_csv).unwrap();
    assert_eq!(
        csv1, csv2,
        "same config + seed must produce identical results.csv"
    );

    // different seed must flow through to different results
    let s3 = run_from_path(&cfg_path, Some(8), Some(dir.join("out3")), 1).unwrap();
    assert_ne!(csv1, fs::read(&s3.results_csv).unwrap());

    fs::remove_dir_all(&dir).ok();
}

#[test]
fn jobs_parallelism_does_not_change_results() {
    let dir = work_dir("jobs");
    write_fixture(&dir, "alpha.csv", 11);
    let cfg_path = dir.join("run.toml");
    fs::write(
        &cfg_path,
        small_config("[experiment]\nmode = \"standard\"\nhorizons = [2, 4]\n"),
    )
    .unwrap();
    let s1 = run_from_path(&cfg_path, None, Some(dir.join("seq")), 1).unwrap();
    let s2 = run_from_path(&cfg_path, None, Some(dir.join("par")), 4).unwrap();
    assert_eq!(
        fs::read(&s1.results_csv).unwrap(),
        fs::read(&s2.results_csv).unwrap()
    );
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn pretrain_then_finetune_and_lora_through_configs() {
    let dir = work_dir("paradigms");
    // two pretraining corpora plus an unseen fine-tuning dataset
    write_fixture(&dir, "alpha.csv", 31);
    let trend = SynthSpec {
        length: 600,
        seed: 32,
        family: tsforge::synth::PatternFamily::TrendSeasonal,
        ..SynthSpec::default()
    };
    gen_synth(&trend, dir.join("beta.csv")).unwrap();
    let ar = SynthSpec {
        length: 600,
        seed: 33,
        family: tsforge::synth::PatternFamily::Ar1,
        ..SynthSpec::default()
    };
    gen_synth(&ar, dir.join("gamma.csv")).unwrap();

    // pretrain on two patterns at two horizons
    let pre_cfg = small_config("[experiment]\nmode = \"standard\"\nhorizons = [2, 4]\n").replace(
        "path = \"alpha.csv\"",
        "path = \"alpha.csv\"\n\n[[dataset]]\nid = \"beta\"\npath = \"beta.csv\"",
    );
    fs::write(dir.join("pretrain.toml"), pre_cfg).unwrap();
    let pre = run_from_path(&dir.join("pretrain.toml"), None, Some(dir.join("pre")), 1).unwrap();
    for h in [2, 4] {
        assert!(pre.out_dir.join(format!("checkpoints/h{h}.ckpt")).is_file());
    }
    let base_ckpt =
        tsforge::backbone::Checkpoint::read(pre.out_dir.join("checkpoints/h4.ckpt")).unwrap();

    // fine-tune every parameter on the unseen dataset, per-horizon template
    let tune_template = |kind: &str| {
        small_config("[experiment]\nmode = \"standard\"\nhorizons = [2, 4]\n").replace(
            "id = \"alpha\"\npath = \"alpha.csv\"",
            "id = \"gamma\"\npath = \"gamma.csv\"",
        ) + &format!(
            "\n[paradigm]\nkind = \"{kind}\"\ncheckpoint = \"pre/checkpoints/h{{horizon}}.ckpt\"\n"
        )
    };
    fs::write(dir.join("finetune.toml"), tune_template("full_finetune")).unwrap();
    let tuned = run_from_path(&dir.join("finetune.toml"), None, Some(dir.join("ft")), 1).unwrap();
    let tuned_ckpt =
        tsforge::backbone::Checkpoint::read(tuned.out_dir.join("checkpoints/h4.ckpt")).unwrap();
    assert_ne!(
        tuned_ckpt.payload, base_ckpt.payload,
        "fine-tuning must move the weights"
    );
    assert!(tsforge::backbone::Backbone::load(&tuned_ckpt)
        .unwrap()
        .lora()
        .is_none());

    // LoRA on the same base: adapters present, base weights bit-identical
    fs::write(dir.join("lora.toml"), tune_template("lora")).unwrap();
    let lora = run_from_path(&dir.join("lora.toml"), None, Some(dir.join("lora")), 1).unwrap();
    let lora_ckpt =
        tsforge::backbone::Checkpoint::read(lora.out_dir.join("checkpoints/h4.ckpt")).unwrap();
    let lora_model = tsforge::backbone::Backbone::load(&lora_ckpt).unwrap();
    assert!(lora_model.lora().is_some());
    assert_eq!(
        lora_model.base_payload_bytes(),
        tsforge::backbone::Backbone::load(&base_ckpt)
            .unwrap()
            .base_payload_bytes(),
        "LoRA training must leave the base weights untouched"
    );

    fs::remove_dir_all(&dir).ok();
}

#[test]
fn padded_133_slot_prompt_layout_runs_end_to_end() {
    let dir = work_dir("slots133");
    write_fixture(&dir, "alpha.csv", 21);
    let cfg_path = dir.join("run.toml");
    let cfg = small_config("[experiment]\nmode = \"standard\"\nhorizons = [4]\n")
        .replace("mode = \"ts_prompt\"", "mode = \"ts_prompt\"\nslots = 133");
    fs::write(&cfg_path, cfg).unwrap();
    let summary = run_from_path(&cfg_path, None, Some(dir.join("out")), 1).unwrap();
    let ckpt =
        tsforge::backbone::Checkpoint::read(summary.out_dir.join("checkpoints/h4.ckpt")).unwrap();
    let model = tsforge::backbone::Backbone::load(&ckpt).unwrap();
    assert_eq!(model.config().prompt_rows, 133);
    assert_eq!(model.config().input_rows(), 133 + 16);
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn missing_dataset_fails_before_any_output() {
    let dir = work_dir("failfast");
    let cfg_path = dir.join("run.toml");
    fs::write(
        &cfg_path,
        small_config("[experiment]\nmode = \"standard\"\nhorizons = [4]\n"),
    )
    .unwrap();
    let err = run_from_path(&cfg_path, None, Some(dir.join("out")), 1).unwrap_err();
    assert!(matches!(err, tsforge::Error::Config(_)), "{err}");
    assert!(
        !dir.join("out").exists(),
        "no artifacts may be written on config failure"
    );
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn few_shot_run_downsamples_only_the_training_corpus() {
    let dir = work_dir("fewshot");
    write_fixture(&dir, "alpha.csv", 5);
    let cfg_path = dir.join("run.toml");
    // rate 20 keeps 5% of the training split
    let mut cfg = small_config("[experiment]\nmode = \"few_shot\"\nhorizons = [4]\nrate = 20\n");
    cfg = cfg.replace("batch_size = 8", "batch_size = 2");
    fs::write(&cfg_path, cfg).unwrap();
    let summary = run_from_path(&cfg_path, None, Some(dir.join("out")), 1).unwrap();

    // T=600 -> train 420 -> ceil(420/20) = 21 rows -> 21 - (16+4) + 1 = 2 windows
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(summary.report_json).unwrap()).unwrap();
    let audits = report["audits"].as_array().unwrap();
    let windows = audits
        .iter()
        .find(|a| a["key"] == "corpus_windows/h4")
        .map(|a| a["value"].as_str().unwrap())
        .unwrap();
    assert_eq!(windows, "2");
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn cli_gen_synth_run_and_eval_round_trip() {
    let dir = work_dir("cli");
    let bin = env!("CARGO_BIN_EXE_tsforge");

    let status = Command::new(bin)
        .args(["gen-synth", "--length", "600", "--seed", "4", "--out"])
        .arg(dir.join("alpha.csv"))
        .status()
        .unwrap();
    assert!(status.success());

    let cfg_path = dir.join("run.toml");
    fs::write(
        &cfg_path,
        small_config("[experiment]\nmode = \"standard\"\nhorizons = [4]\n"),
    )
    .unwrap();
    let out = Command::new(bin)
        .args(["run", "--config"])
        .arg(&cfg_path)
        .args(["--seed", "7", "--out"])
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.join("out/results.csv").is_file());

    // features + tokenize dumps
    let st = Command::new(bin)
        .args(["features", "--data"])
        .arg(dir.join("alpha.csv"))
        .args(["--out"])
        .arg(dir.join("features.json"))
        .status()
        .unwrap();
    assert!(st.success());
    let feats: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("features.json")).unwrap()).unwrap();
    assert_eq!(feats["features"].as_array().unwrap().len(), 25);

    let st = Command::new(bin)
        .args([
            "tokenize",
            "--kind",
            "quantized",
            "--num-bins",
            "32",
            "--data",
        ])
        .arg(dir.join("alpha.csv"))
        .args(["--out"])
        .arg(dir.join("tokens.json"))
        .status()
        .unwrap();
    assert!(st.success());
    let toks: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("tokens.json")).unwrap()).unwrap();
    assert_eq!(toks["ids"].as_array().unwrap().len(), 1);
    assert_eq!(toks["ids"][0].as_array().unwrap().len(), 600);

    // eval on two tiny csvs with a known gap
    fs::write(dir.join("pred.csv"), "v\n1.0\n2.0\n3.0\n").unwrap();
    fs::write(dir.join("truth.csv"), "v\n2.0\n3.0\n4.0\n").unwrap();
    let out = Command::new(bin)
        .args(["eval", "--pred"])
        .arg(dir.join("pred.csv"))
        .args(["--truth"])
        .arg(dir.join("truth.csv"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("mse=1"), "{text}");
    assert!(text.contains("mae=1"), "{text}");

    // unknown config key surfaces with a nonzero exit and names the key
    fs::write(
        dir.join("bad.toml"),
        small_config("[experiment]\nmode = \"standard\"\n") + "\n[tokenizr]\nkind = \"linear\"\n",
    )
    .unwrap();
    let out = Command::new(bin)
        .args(["run", "--config"])
        .arg(dir.join("bad.toml"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("tokenizr"));

    fs::remove_dir_all(&dir).ok();
}
