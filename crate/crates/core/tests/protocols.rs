//! Protocol-level contracts: the diversity sweep's training-set nesting and
//! its identity with the standard run at m = N, zero-shot guards, and
//! horizon mismatch detection.

use tsforge::evalkit::{
    evaluate_backbone, prepare, run_diversity_sweep, run_standard, run_zero_shot_protocol,
    DatasetSource, ModelSettings, ParadigmChoice, PromptMode, RowKey, TokenizerChoice, TrainRecipe,
};
use tsforge::prompt::{FeatureCatalog, PromptMatrix};
use tsforge::series::{make_windows, SplitSpec};
use tsforge::synth::{gen_series, SynthSpec};
use tsforge::tokenizer::PatchConfig;
use tsforge::trainer::TrainConfig;

fn source(id: &str, seed: u64, scale: f64) -> DatasetSource {
    let spec = SynthSpec {
        length: 400,
        seed,
        scale,
        ..SynthSpec::default()
    };
    DatasetSource {
        id: id.into(),
        series: gen_series(&spec).unwrap(),
    }
}

fn recipe(label: &str, seed: u64) -> TrainRecipe {
    TrainRecipe {
        method_label: label.into(),
        prompt: PromptMode::TsPrompt {
            catalog: FeatureCatalog::standard(),
        },
        model: ModelSettings {
            lookback: 16,
            tokenizer: TokenizerChoice::Linear {
                patch: PatchConfig::new(4, 2).unwrap(),
            },
            num_layers: 1,
            model_dim: 8,
            num_heads: 2,
            ff_dim: 16,
            instance_norm: true,
        },
        paradigm: ParadigmChoice::FromScratch,
        train: TrainConfig {
            epochs: 1,
            grad_accum_steps: 1,
            batch_size: 8,
            ..TrainConfig::default()
        },
        window_stride: 1,
        seed,
    }
}

#[test]
fn diversity_sweep_counts_and_full_m_identity() {
    let sources = vec![source("a", 1, 1.0), source("b", 2, 3.0)];
    let split = SplitSpec::default();
    let rec = recipe("joint", 99);

    let sweep = run_diversity_sweep(&sources, &split, &rec, &[4], &[1, 2], 1).unwrap();

    // training-corpus window count for m = k is the sum of the first k
    // per-dataset counts
    let mut expected = Vec::new();
    let mut acc = 0usize;
    for s in &sources {
        let prep = prepare(s, &split, 1).unwrap();
        acc += make_windows(&prep.train, 16, 4, 1).unwrap().len();
        expected.push(acc);
    }
    for (m, want) in [(1usize, expected[0]), (2, expected[1])] {
        let audit = sweep
            .audits
            .iter()
            .find(|a| a.key == format!("corpus_windows/m{m}_h4"))
            .unwrap_or_else(|| panic!("missing audit for m={m}"));
        assert_eq!(audit.value, want.to_string(), "m={m}");
    }

    // every dataset is evaluated under every sweep column
    for ds in ["a", "b"] {
        for col in ["m=1", "m=2"] {
            assert!(
                sweep.table.get(ds, RowKey::Horizon(4), col).is_some(),
                "{ds}/{col}"
            );
        }
    }

    // m = N reproduces the standard joint run exactly (same seed)
    let standard = run_standard(&sources, &split, &rec, &[4], false, 1).unwrap();
    for ds in ["a", "b"] {
        let full = sweep.table.get(ds, RowKey::Horizon(4), "m=2").unwrap();
        let std_run = standard.table.get(ds, RowKey::Horizon(4), "joint").unwrap();
        assert_eq!(full, std_run, "m=N must equal the standard run for `{ds}`");
    }
}

#[test]
fn zero_shot_rejects_equal_source_and_target() {
    let sources = vec![source("a", 1, 1.0), source("b", 2, 1.0)];
    let err = run_zero_shot_protocol(
        &sources,
        &SplitSpec::default(),
        &recipe("zs", 5),
        &[4],
        "a",
        "a",
        1,
    )
    .unwrap_err();
    assert!(err.to_string().contains("differ"), "{err}");
}

#[test]
fn evaluation_rejects_horizon_mismatch() {
    let sources = vec![source("a", 1, 1.0)];
    let split = SplitSpec::default();
    let out = run_standard(&sources, &split, &recipe("m", 3), &[4], false, 1).unwrap();
    let model = tsforge::backbone::Backbone::load(&out.artifacts[0].checkpoint).unwrap();
    let prep = prepare(&sources[0], &split, 1).unwrap();
    let err = evaluate_backbone(&model, &PromptMatrix::empty(), &prep.test, 8).unwrap_err();
    assert!(matches!(err, tsforge::Error::HorizonMismatch { .. }));
}
