//! Acceptance suite. Each test prints one `PASS`/`FAIL` line (to stderr,
//! bypassing the test harness capture) and then asserts.

use std::io::Write;

use gamma_filter::conjugate::GammaPosterior;
use gamma_filter::experiments::{
    lp_experiment, run_lp, run_simulate, run_stability, run_validate, stability_experiment, ExperimentConfig,
    Overlap,
};
use gamma_filter::mixed::{MixedGammaPosterior, MixingMeasure};
use gamma_filter::model::{sample_initial, simulate, ModelParams};
use gamma_filter::reference::{bayes_filter, grid_from_mixture};
use gamma_filter::sampling::RngStream;
use gamma_filter::special::gamma_cdf;
use gamma_filter::stability::{critical_delta, lemma10_tail_check, lemma2_tail_check, scaled_observation_moments};
use rand::Rng;

const MC_SIGMAS: f64 = 4.0;

fn verdict(id: u32, name: &str, pass: bool, detail: &str) {
    let line = format!(
        "acceptance {id} [{name}]: {} ({detail})\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn reference_config(b: f64, horizon: usize, n_trajectories: usize, seed: u64) -> ExperimentConfig {
    let json = format!(
        r#"{{
            "params": {{"alpha": 1.0, "beta": 1.0, "b": {b}}},
            "mix0_assumed": {{"atoms": [[1.0, 0.5], [2.0, 0.5]]}},
            "mix0_true": {{"atoms": [[1.0, 0.75], [2.0, 0.25]]}},
            "horizon": {horizon},
            "n_trajectories": {n_trajectories},
            "seed": {seed}
        }}"#
    );
    ExperimentConfig::from_json_str(&json).unwrap()
}

#[test]
fn criterion_1_closed_forms_match_grid_recursion() {
    let steps = 10;
    let nodes = 2048;
    let mix3 = MixingMeasure::new(vec![(0.5, 0.2), (1.0, 0.5), (2.5, 0.3)]).unwrap();
    let mut worst_conj: f64 = 0.0;
    let mut worst_mixed: f64 = 0.0;
    let mut seed = 100;
    for alpha in [1.0, 2.0, 3.0] {
        for beta in [1.0, 2.0, 3.0] {
            for b in [0.8, 1.0, 1.25] {
                let params = ModelParams::new(alpha, beta, b).unwrap();
                let q = params.q();
                seed += 1;
                let mut rng = RngStream::new(seed, 0);

                let conj0 = GammaPosterior::new(1.0, q).unwrap();
                let single = MixedGammaPosterior::new(q, MixingMeasure::dirac(1.0).unwrap()).unwrap();
                let x0 = sample_initial(&mut rng, &single.mix, q).unwrap();
                let ys = simulate(&mut rng, &params, x0, steps).unwrap().y;
                let grids = bayes_filter(&grid_from_mixture(&single, nodes).unwrap(), &params, &ys).unwrap();
                let mut conj = conj0;
                for (k, &y) in ys.iter().enumerate() {
                    conj = conj.update(b, y).unwrap();
                    let l1 = grids[k].l1_to_density(|x| conj.pdf(x), |x| gamma_cdf(conj.rate, q, x));
                    worst_conj = worst_conj.max(l1);
                }

                let mut mixed = MixedGammaPosterior::new(q, mix3.clone()).unwrap();
                let x0 = sample_initial(&mut rng, &mixed.mix, q).unwrap();
                let ys = simulate(&mut rng, &params, x0, steps).unwrap().y;
                let grids = bayes_filter(&grid_from_mixture(&mixed, nodes).unwrap(), &params, &ys).unwrap();
                for (k, &y) in ys.iter().enumerate() {
                    mixed = mixed.update(&params, y).unwrap();
                    worst_mixed = worst_mixed.max(grids[k].l1_to_mixture(&mixed));
                }
            }
        }
    }
    let pass = worst_conj <= 1e-3 && worst_mixed <= 1e-3;
    verdict(
        1,
        "conjugacy vs grid oracle",
        pass,
        &format!("max L1 conjugate {worst_conj:.3e}, mixed {worst_mixed:.3e}, tolerance 1e-3"),
    );
    assert!(pass);
}

#[test]
fn criterion_2_closed_form_recursion_identity() {
    let mut rng = RngStream::new(200, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let b: f64 = 0.5 + 1.5 * rng.random::<f64>();
        let params = ModelParams::new(1.0 + rng.random::<f64>(), 0.5 + rng.random::<f64>(), b).unwrap();
        let n = 1 + (rng.random::<f64>() * 60.0) as usize;
        let ys: Vec<f64> = (0..n).map(|_| 1e-3 + 10.0 * rng.random::<f64>()).collect();
        let atoms = vec![(0.3, 0.3), (1.1, 0.3), (4.0, 0.4)];
        let (u0, o0) = (0.2, 5.0);
        let mix = MixingMeasure::with_support(atoms.clone(), u0, o0).unwrap().update_all(&params, &ys).unwrap();
        let conj = GammaPosterior::new(atoms[1].0, params.q()).unwrap().update_all(b, &ys).unwrap();

        let closed = |start: f64| {
            let ni = n as i32;
            b.powi(-ni) * start
                + ys.iter()
                    .enumerate()
                    .map(|(j, y)| b.powi(j as i32 + 1 - ni) * y)
                    .sum::<f64>()
        };
        let rel = |got: f64, want: f64| ((got - want) / want).abs();
        for (i, &(l, _)) in atoms.iter().enumerate() {
            worst = worst.max(rel(mix.rate(i), closed(l)));
        }
        worst = worst.max(rel(conj.rate, closed(atoms[1].0)));
        worst = worst.max(rel(mix.support_lo(), closed(u0)));
        worst = worst.max(rel(mix.support_hi(), closed(o0)));
    }
    let pass = worst <= 1e-12;
    verdict(
        2,
        "closed-form recursion identity",
        pass,
        &format!("max relative error {worst:.3e}, tolerance 1e-12"),
    );
    assert!(pass);
}

#[test]
fn criterion_3_pathwise_bound_holds() {
    let config = reference_config(1.0, 60, 200, 300);
    let run = stability_experiment(&config).unwrap();
    let s = &run.summary;
    let pass = s.constants.h_certified && s.violations_half_integral == 0 && s.violations_full_integral == 0;
    let min_margin = run
        .reports
        .iter()
        .flat_map(|r| r.tv.iter().zip(&r.bound).map(|(t, b)| b / (2.0 * t)))
        .fold(f64::INFINITY, f64::min);
    verdict(
        3,
        "pathwise forgetting bound",
        pass,
        &format!(
            "H = {:.4}, violations {} (½∫) / {} (∫) over {} paths, min bound/(2 tv) {min_margin:.3}",
            s.constants.density_ratio.h_inf,
            s.violations_half_integral,
            s.violations_full_integral,
            run.reports.len()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_4_rate_is_independent_of_drift() {
    let mut rates = Vec::new();
    let mut pass = true;
    let mut detail = String::new();
    for (i, b) in [0.8, 1.0, 1.25].into_iter().enumerate() {
        let run = stability_experiment(&reference_config(b, 60, 200, 400 + i as u64)).unwrap();
        let s = &run.summary;
        pass &= s.fraction_below_threshold >= 0.95;
        detail += &format!(
            "b={b}: {:.3} below {:.4}, median {:.4}; ",
            s.fraction_below_threshold,
            s.rate_threshold,
            s.rate_summary.map(|r| r.median).unwrap_or(f64::NAN)
        );
        rates.push(run.fitted_rates());
    }
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let o = Overlap::between(&rates[i], &rates[j]);
        pass &= o.overlaps();
        detail += &format!("KS p({i},{j}) = {:.3}; ", o.ks_pvalue);
    }
    verdict(4, "rate 1/δ independent of b", pass, detail.trim_end_matches("; "));
    assert!(pass);
}

#[test]
fn criterion_5_small_observation_tail() {
    let params = ModelParams::new(1.0, 1.0, 1.0).unwrap();
    let mix0 = MixingMeasure::dirac(1.0).unwrap();
    let mut pass = true;
    let mut worst_excess = f64::NEG_INFINITY;
    for (k, delta) in [1.5, 1.9].into_iter().enumerate() {
        let mut rng = RngStream::new(500, k as u64);
        let check = lemma2_tail_check(&params, &mix0, delta, 12, 100_000, &mut rng).unwrap();
        for row in &check.rows {
            pass &= row.holds(MC_SIGMAS);
            worst_excess = worst_excess.max((row.empirical - row.bound) / row.std_error.max(1e-300));
        }
    }
    verdict(
        5,
        "P(b^j Y_j <= δ^j) tail bound",
        pass,
        &format!("δ ∈ {{1.5, 1.9}}, j ≤ 12, n_mc = 1e5, max (emp - bound)/SE = {worst_excess:.2}"),
    );
    assert!(pass);
}

#[test]
fn criterion_6_last_violation_survival() {
    let params = ModelParams::new(1.0, 1.0, 1.0).unwrap();
    let mix0 = MixingMeasure::dirac(1.0).unwrap();
    let mut rng = RngStream::new(600, 0);
    let check = lemma10_tail_check(&params, &mix0, 1.5, 20, 100_000, &mut rng).unwrap();
    let pass = (check.q_bar.unwrap() - 0.75).abs() < 1e-12 && check.rows.iter().all(|r| r.holds(MC_SIGMAS));
    let last = check.rows.last().unwrap();
    verdict(
        6,
        "P(J_δ > n) geometric bound",
        pass,
        &format!(
            "q̄ = {:.4}, n ≤ 20, n_mc = 1e5, at n = 20: empirical {:.4e} vs bound {:.4e}",
            check.q_bar.unwrap(),
            last.empirical,
            last.bound
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_7_negative_moment_identity() {
    let cases = [
        (1.0, 1.0, 1.0, vec![(1.0, 1.0)]),
        (2.0, 3.0, 0.8, vec![(0.5, 0.4), (2.0, 0.6)]),
        (1.5, 2.0, 1.25, vec![(1.0, 0.75), (2.0, 0.25)]),
        (3.0, 1.0, 1.0, vec![(0.7, 0.2), (1.0, 0.3), (3.0, 0.5)]),
    ];
    let mut pass = true;
    let mut worst: f64 = 0.0;
    for (k, (alpha, beta, b, atoms)) in cases.into_iter().enumerate() {
        let params = ModelParams::new(alpha, beta, b).unwrap();
        let mix0 = MixingMeasure::new(atoms).unwrap();
        let mut rng = RngStream::new(700, k as u64);
        let rows = scaled_observation_moments(&params, &mix0, beta / 2.0, 10, 100_000, &mut rng).unwrap();
        for r in rows {
            let z = (r.empirical - r.predicted).abs() / r.std_error;
            worst = worst.max(z);
            pass &= z <= MC_SIGMAS;
        }
    }
    verdict(
        7,
        "E((b^n Y_n)^-p) identity",
        pass,
        &format!("p = β/2, n ≤ 10, n_mc = 1e5, 4 configs, max |z| = {worst:.2}"),
    );
    assert!(pass);
}

#[test]
fn criterion_8_lp_rate() {
    let mut config = reference_config(1.0, 40, 500, 800);
    config.p = Some(0.3);
    let run = lp_experiment(&config).unwrap();
    let s = &run.summary;
    let pass = (s.rho - 0.9454).abs() < 1e-4 && s.passes == Some(true) && s.rho_at_least_ew_p;
    verdict(
        8,
        "L^p forgetting rate",
        pass,
        &format!(
            "ρ = {:.4}, fitted {:.4} ≤ ln ρ + 0.05 = {:.4}, E(W^p) = {:.4}",
            s.rho,
            s.fitted_rate.unwrap_or(f64::NAN),
            s.rate_threshold,
            s.ew_p
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_9_deterministic_outputs() {
    let base = tempfile::tempdir().unwrap();
    let mut config = reference_config(1.25, 12, 6, 900);
    config.p = Some(0.3);
    config.grid_nodes = 256;
    let files = ["stability.csv", "lp.csv", "validate.csv", "trajectory_0000.csv", "trajectory_0005.csv"];
    let mut outputs = Vec::new();
    for (run, threads) in [(0, 1), (1, 1), (2, 3)] {
        config.output_dir = base.path().join(format!("run{run}"));
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            run_stability(&config).unwrap();
            run_lp(&config).unwrap();
            run_validate(&config).unwrap();
            run_simulate(&config).unwrap();
        });
        let bytes: Vec<Vec<u8>> = files
            .iter()
            .map(|f| std::fs::read(config.output_dir.join(f)).unwrap())
            .collect();
        outputs.push(bytes);
    }
    let pass = outputs.windows(2).all(|w| w[0] == w[1]);
    verdict(
        9,
        "byte-identical reruns",
        pass,
        &format!("{} CSV files, 3 runs (1, 1 and 3 threads)", files.len()),
    );
    assert!(pass);
    assert!(critical_delta(&config.params) > 1.0);
}
