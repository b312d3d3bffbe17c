use std::time::Instant;
use arcchoice::choice::{log_likelihood_prepared, prepare_households, ChoiceModel, Kernel};
use arcchoice::consider::{BasicArc, Consideration};
use arcchoice::dist::RiskDistribution;
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
    let population = generate_population(&spec, 9_000).unwrap();
    let panel = simulate_choices(&truth, &population, 5_000).unwrap();
    let prepared = prepare_households(&UtilityFamily::Ntd, &panel.dataset.observations, 0.02).unwrap();

    let dist = RiskDistribution::scaled_beta(1.9, 8.1, 0.02).unwrap();
    let t = Instant::now();
    let mut total = 0.0;
    const REPS: usize = 20;
    for _ in 0..REPS {
        let ll = log_likelihood_prepared(&prepared, &truth.mechanism, &dist, Kernel::Breakpoint).unwrap();
        total += ll.total;
    }
    println!("loglik eval: {:.1?} per eval (checksum {total:.1})", t.elapsed() / REPS as u32);

    // Cost of the distribution CDF alone at the same call volume.
    let t = Instant::now();
    let mut acc = 0.0;
    for i in 0..(REPS * 200_000) {
        acc += dist.cdf(1e-8 + (i % 1999) as f64 * 1e-5);
    }
    println!("200k cdf evals: {:.1?} (checksum {acc:.1})", t.elapsed() / REPS as u32);
}
