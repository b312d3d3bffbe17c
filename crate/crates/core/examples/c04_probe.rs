use std::time::Instant;
use arcchoice::choice::ChoiceModel;
use arcchoice::consider::{BasicArc, Consideration};
use arcchoice::dist::RiskDistribution;
use arcchoice::estimate::{fit, FitModel, FitOptions};
use arcchoice::optim::NelderMeadOptions;
use arcchoice::simulate::{generate_population, simulate_choices, PopulationSpec};
use arcchoice::UtilityFamily;

fn main() {
    let spec = PopulationSpec::collision_default(50_000);
    let truth = ChoiceModel {
        family: UtilityFamily::Ntd,
        dist: RiskDistribution::scaled_beta(1.70, 7.45, 0.02).unwrap(),
        mechanism: Consideration::Basic(
            BasicArc::new(vec![1.0, 0.920, 0.206, 0.412, 0.059], 0).unwrap(),
        ),
    };
    let alphas_true = [0.920, 0.206, 0.412, 0.059];
    for rep in [0u64, 1, 2] {
        let population = generate_population(&spec, 9_000 + rep).unwrap();
        let panel = simulate_choices(&truth, &population, 5_000 + rep).unwrap();
        for (starts, max_iters, ftol_abs) in [(1usize, 400usize, 1e-6f64), (1, 700, 1e-7), (2, 700, 1e-7)] {
            let t = Instant::now();
            let opts = FitOptions {
                starts,
                seed: rep,
                optimizer: NelderMeadOptions { max_iters, ftol_abs, ftol_rel: 1e-9 },
                ..FitOptions::default()
            };
            let res = fit(
                &FitModel::Basic { default_alt: Some(0) },
                &UtilityFamily::Ntd,
                &panel.dataset.observations,
                &opts,
            )
            .unwrap();
            let names = ["alpha_2", "alpha_3", "alpha_4", "alpha_5"];
            let worst = names
                .iter()
                .zip(alphas_true)
                .map(|(n, t)| (res.value(n).unwrap() - t).abs())
                .fold(0.0f64, f64::max);
            let b1 = res.value("beta1").unwrap();
            let b2 = res.value("beta2").unwrap();
            let mean = 0.02 * b1 / (b1 + b2);
            let mean_err = (mean - 0.02 * 1.70 / 9.15).abs() / (0.02 * 1.70 / 9.15);
            println!(
                "rep={rep} starts={starts} iters={max_iters} ftol={ftol_abs:.0e}: {:.1?} conv={} it={} ev={} worst_alpha={worst:.4} mean_err={:.2}%",
                t.elapsed(), res.converged, res.iterations, res.evaluations, 100.0 * mean_err
            );
        }
    }
}
