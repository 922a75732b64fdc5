use std::path::PathBuf;

use gamma_filter::experiments::ExperimentConfig;
use gamma_filter::mixed::{MixedGammaPosterior, MixingMeasure};
use gamma_filter::model::Trajectory;
use gamma_filter::reference::GridDensity;

fn seeds(target: &str) -> Vec<String> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut files: Vec<_> = std::fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    assert!(!files.is_empty(), "no seeds in {}", dir.display());
    files.iter().map(|p| std::fs::read_to_string(p).unwrap()).collect()
}

#[test]
fn corpus_seeds_are_valid_inputs() {
    for s in seeds("parse_config") {
        ExperimentConfig::from_json_str(&s).unwrap();
    }
    for s in seeds("parse_mixing_measure") {
        serde_json::from_str::<MixingMeasure>(&s).unwrap();
    }
    for s in seeds("parse_trajectory") {
        Trajectory::from_csv_str(&s).unwrap();
    }
    for s in seeds("parse_grid") {
        GridDensity::from_csv_str(&s).unwrap();
    }
    for s in seeds("parse_posterior") {
        MixedGammaPosterior::from_csv_str(&s).unwrap();
    }
}
