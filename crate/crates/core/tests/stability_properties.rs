use gamma_filter::experiments::{lp_experiment, ExperimentConfig};
use gamma_filter::mixed::{MixedGammaPosterior, MixingMeasure};
use gamma_filter::model::{sample_initial, simulate, ModelParams};
use gamma_filter::sampling::RngStream;
use gamma_filter::stability::{ew_beta_moment, thm4_bound, thm4_constants, tv_mixed_pair};
use proptest::prelude::*;

#[test]
fn pure_gamma_lp_rate_matches_beta_moment() {
    let config = ExperimentConfig::from_json_str(
        r#"{
            "params": {"alpha": 1.0, "beta": 1.0, "b": 1.0},
            "mix0_assumed": {"atoms": [[2.0, 1.0]]},
            "mix0_true": {"atoms": [[1.0, 1.0]]},
            "horizon": 40,
            "n_trajectories": 500,
            "p": 0.3,
            "seed": 31
        }"#,
    )
    .unwrap();
    let run = lp_experiment(&config).unwrap();
    let params = &config.params;
    let ln_ew_p = ew_beta_moment(params, 0.3).unwrap().ln();
    let fitted = run.summary.fitted_rate.unwrap();
    assert!(fitted <= ln_ew_p + 0.05, "fitted {fitted} vs ln E(W^p) {ln_ew_p}");
}

#[test]
fn bound_eventually_decreases_on_simulated_paths() {
    let params = ModelParams::new(1.0, 1.0, 1.0).unwrap();
    let consts = thm4_constants(&params, 1.0, 2.0, 0.7, 1.0).unwrap();
    let mix = MixingMeasure::new(vec![(1.0, 0.5), (2.0, 0.5)]).unwrap();
    for id in 0..20 {
        let mut rng = RngStream::new(77, id);
        let x0 = sample_initial(&mut rng, &mix, params.q()).unwrap();
        let ys = simulate(&mut rng, &params, x0, 60).unwrap().y;
        let bound = thm4_bound(&consts, params.b(), &ys);
        assert!(bound[30..].windows(2).all(|w| w[1] < w[0]), "path {id}");
    }
}

fn posterior() -> impl Strategy<Value = MixedGammaPosterior> {
    prop::collection::vec((0.2f64..8.0, 0.05f64..1.0), 1..4).prop_map(|atoms| {
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        let mix = MixingMeasure::new(atoms.into_iter().map(|(l, w)| (l, w / total)).collect()).unwrap();
        MixedGammaPosterior::new(2.5, mix).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tv_triangle_inequality(a in posterior(), b in posterior(), c in posterior()) {
        let ab = tv_mixed_pair(&a, &b).unwrap();
        let bc = tv_mixed_pair(&b, &c).unwrap();
        let ac = tv_mixed_pair(&a, &c).unwrap();
        prop_assert!(ac <= ab + bc + 2e-6);
    }
}
