//! One function per subcommand. Each builds its inputs from the resolved
//! configuration plus flags, runs the library, and persists JSON/CSV
//! artifacts plus the run manifest into the output directory.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use arcchoice::choice::{log_likelihood, ChoiceModel, Kernel};
use arcchoice::cutoffs::{verify_order_condition, CutoffMatrix, TripleOrder};
use arcchoice::data::{
    read_dataset_csv, read_portfolio_csv, write_dataset_csv, write_portfolio_csv, write_truth_csv,
    Dataset, Observation, TruthRecord,
};
use arcchoice::estimate::{bootstrap_ci, fit, vuong_test, EstimationResult};
use arcchoice::ident::{
    basic_arc_ntd_field, limited_consideration_test, recover_arc_parameters,
    recover_density_sequential, LinearMenuMap, RecoveryOptions,
};
use arcchoice::simulate::{generate_population, simulate_choices, PopulationSpec};
use arcchoice::welfare::aggregate_loss;
use serde::Serialize;

use crate::config::Config;
use crate::manifest::{emit_csv, emit_json, Manifest};
use crate::{CliArgs, CliError};

fn load_data(path: &Path, portfolio: bool, manifest: &mut Manifest) -> Result<Dataset, CliError> {
    manifest.input(path)?;
    if portfolio {
        let (rows, demographic_names) = read_portfolio_csv(path)?;
        let observations =
            rows.iter().map(|r| r.to_observation()).collect::<arcchoice::Result<Vec<_>>>()?;
        Ok(Dataset { observations, demographic_names })
    } else {
        Ok(read_dataset_csv(path)?)
    }
}

/// Runs a library CSV writer against a temporary path, then renames into
/// place and stamps the output, preserving the atomic-write contract.
fn persist_csv_output(
    manifest: &mut Manifest,
    out: &Path,
    name: &str,
    write: impl FnOnce(&Path) -> arcchoice::Result<()>,
) -> Result<(), CliError> {
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", out.display())))?;
    let tmp = out.join(format!(".{name}.tmp"));
    write(&tmp)?;
    let path = out.join(name);
    std::fs::rename(&tmp, &path)
        .map_err(|e| CliError::Io(format!("cannot persist {}: {e}", path.display())))?;
    manifest.output(&path)?;
    Ok(())
}

fn menu_size(data: &Dataset) -> Result<usize, CliError> {
    let d = data
        .observations
        .first()
        .map(|o| o.context.n_alternatives())
        .ok_or_else(|| CliError::Validation("dataset has no rows".into()))?;
    for (i, obs) in data.observations.iter().enumerate() {
        if obs.context.n_alternatives() != d {
            return Err(CliError::Validation(format!(
                "row {i}: menu has {} alternatives, expected {d}",
                obs.context.n_alternatives()
            )));
        }
    }
    Ok(d)
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct SimulateSummary {
    households: usize,
    menu_size: usize,
    lines: usize,
    seed: u64,
    observed_shares: Vec<f64>,
}

pub fn simulate(
    config: &Config,
    args: &CliArgs,
    manifest: &mut Manifest,
    out: &Path,
) -> Result<i32, CliError> {
    let spec = match args.population.as_str() {
        "collision" => PopulationSpec::collision_default(args.households),
        "triplet" => PopulationSpec::triplet_default(args.households),
        other => {
            return Err(CliError::Validation(format!(
                "unknown population template {other:?} (expected collision or triplet)"
            )))
        }
    };
    let model = ChoiceModel {
        family: config.family()?,
        dist: config.distribution()?,
        mechanism: config.mechanism(spec.menu_size())?,
    };

    let t = Instant::now();
    let population = generate_population(&spec, args.seed)?;
    manifest.timing("generate_population", t);

    let t = Instant::now();
    let panel = simulate_choices(&model, &population, args.seed)?;
    manifest.timing("simulate_choices", t);

    let t = Instant::now();
    if spec.lines.len() == 1 {
        persist_csv_output(manifest, out, "dataset.csv", |path| {
            write_dataset_csv(path, &panel.dataset)
        })?;
    } else {
        let rows = panel.portfolio_observations(&panel.dataset)?;
        persist_csv_output(manifest, out, "dataset.csv", |path| {
            write_portfolio_csv(path, &rows, &panel.dataset.demographic_names)
        })?;
    }
    let truth: Vec<TruthRecord> = panel.truth.clone();
    persist_csv_output(manifest, out, "truth.csv", |path| write_truth_csv(path, &truth))?;
    manifest.timing("write_outputs", t);

    let d = spec.menu_size();
    let mut counts = vec![0usize; d];
    for obs in &panel.dataset.observations {
        counts[obs.choice] += 1;
    }
    let n = panel.dataset.observations.len();
    let summary = SimulateSummary {
        households: n,
        menu_size: d,
        lines: spec.lines.len(),
        seed: args.seed,
        observed_shares: counts.iter().map(|&c| c as f64 / n as f64).collect(),
    };
    emit_json(manifest, out, "summary.json", &summary)?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// estimate
// ---------------------------------------------------------------------------

fn parameters_csv(result: &EstimationResult) -> String {
    let mut text = String::from("name,value,free\n");
    for p in &result.parameters {
        let free = result.free_names.iter().any(|n| n == &p.name);
        let _ = writeln!(text, "{},{},{}", p.name, p.value, free);
    }
    text
}

pub fn estimate(
    config: &Config,
    args: &CliArgs,
    manifest: &mut Manifest,
    out: &Path,
) -> Result<i32, CliError> {
    let data = load_data(args.data.as_ref().unwrap(), args.portfolio, manifest)?;
    let family = config.family()?;
    let model = config.fit_model(&args.fit)?;
    let mut opts = config.fit_options()?;
    if let Some(kernel) = &args.kernel {
        opts.kernel = parse_kernel_flag(kernel, config)?;
    }

    let t = Instant::now();
    let mut result = fit(&model, &family, &data.observations, &opts)?;
    manifest.timing("fit", t);

    if args.bootstrap > 0 {
        let t = Instant::now();
        let intervals = bootstrap_ci(
            &model,
            &family,
            &data.observations,
            &opts,
            &result,
            args.bootstrap,
            0.95,
            opts.seed,
        )?;
        result.confidence_intervals = Some(intervals);
        manifest.timing("bootstrap", t);
    }

    emit_json(manifest, out, "estimate.json", &result)?;
    emit_csv(manifest, out, "parameters.csv", &parameters_csv(&result))?;

    if args.strict && !result.converged {
        eprintln!(
            "error: no optimizer start met the tolerance within {} iterations",
            opts.optimizer.max_iters
        );
        return Ok(3);
    }
    Ok(0)
}

fn parse_kernel_flag(flag: &str, config: &Config) -> Result<Kernel, CliError> {
    match flag {
        "breakpoint" => Ok(Kernel::Breakpoint),
        "riemann" => Ok(Kernel::Riemann {
            intervals: config.optimizer.riemann_intervals,
            exact_mass: config.optimizer.riemann_exact_mass,
        }),
        "bruteforce" => Ok(Kernel::BruteForce),
        other => Err(CliError::Validation(format!(
            "unknown kernel {other:?} (expected breakpoint, riemann, or bruteforce)"
        ))),
    }
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct CompareReport {
    consideration: EstimationResult,
    mixed_logit: EstimationResult,
    vuong: arcchoice::estimate::VuongTest,
    /// Positive z favors the consideration model.
    favored: String,
    rejected_at_1_percent: bool,
}

pub fn compare(
    config: &Config,
    args: &CliArgs,
    manifest: &mut Manifest,
    out: &Path,
) -> Result<i32, CliError> {
    let data = load_data(args.data.as_ref().unwrap(), args.portfolio, manifest)?;
    let family = config.family()?;
    let opts = config.fit_options()?;

    let t = Instant::now();
    let arc = fit(&config.fit_model("basic")?, &family, &data.observations, &opts)?;
    manifest.timing("fit_consideration", t);

    let t = Instant::now();
    let ml = fit(&config.fit_model("mixed-logit")?, &family, &data.observations, &opts)?;
    manifest.timing("fit_mixed_logit", t);

    let test = vuong_test(&arc.per_household_loglik, &ml.per_household_loglik)?;
    let report = CompareReport {
        favored: if test.z > 0.0 { "consideration".into() } else { "mixed-logit".into() },
        rejected_at_1_percent: test.z > 0.0 && test.p_value < 0.01,
        consideration: arc,
        mixed_logit: ml,
        vuong: test,
    };
    emit_json(manifest, out, "compare.json", &report)?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// check
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct CheckReport {
    households: usize,
    distinct_menus: usize,
    anchored_cutoffs_increasing: usize,
    anchored_cutoffs_violations: Vec<usize>,
    ratio_condition_satisfied: usize,
    /// Counts of three-alternative cutoff configurations across menus.
    triple_middle_on_interval: usize,
    triple_middle_never_first_best: usize,
    triple_three_way_ties: usize,
    triple_unordered: usize,
    ok: bool,
}

pub fn check(
    config: &Config,
    args: &CliArgs,
    manifest: &mut Manifest,
    out: &Path,
) -> Result<i32, CliError> {
    let data = load_data(args.data.as_ref().unwrap(), args.portfolio, manifest)?;
    menu_size(&data)?;
    let family = config.family()?;
    let nu_bar = config.distribution.nu_bar;

    // Deduplicate identical menus so panel datasets with one shared menu
    // are diagnosed once.
    let mut menus: Vec<&Observation> = Vec::new();
    for obs in &data.observations {
        if !menus.iter().any(|m| m.context.alternatives == obs.context.alternatives) {
            menus.push(obs);
        }
    }

    let t = Instant::now();
    let mut report = CheckReport {
        households: data.observations.len(),
        distinct_menus: menus.len(),
        anchored_cutoffs_increasing: 0,
        anchored_cutoffs_violations: Vec::new(),
        ratio_condition_satisfied: 0,
        triple_middle_on_interval: 0,
        triple_middle_never_first_best: 0,
        triple_three_way_ties: 0,
        triple_unordered: 0,
        ok: true,
    };
    for (i, obs) in menus.iter().enumerate() {
        let order = verify_order_condition(&family, &obs.context, nu_bar)?;
        if order.cutoffs_increasing {
            report.anchored_cutoffs_increasing += 1;
        } else {
            report.anchored_cutoffs_violations.push(i);
        }
        if order.ratio_condition.iter().all(|&r| r) {
            report.ratio_condition_satisfied += 1;
        }
        let matrix = CutoffMatrix::compute(&family, &obs.context, nu_bar)?;
        let d = obs.context.n_alternatives();
        for j in 0..d {
            for k in (j + 1)..d {
                for l in (k + 1)..d {
                    match matrix.triple_case(j, k, l) {
                        TripleOrder::MiddleOnInterval => report.triple_middle_on_interval += 1,
                        TripleOrder::MiddleNeverFirstBest => {
                            report.triple_middle_never_first_best += 1
                        }
                        TripleOrder::ThreeWayTie => report.triple_three_way_ties += 1,
                        TripleOrder::Unordered => report.triple_unordered += 1,
                    }
                }
            }
        }
    }
    manifest.timing("diagnostics", t);
    report.ok = report.anchored_cutoffs_violations.is_empty();
    let ok = report.ok;
    emit_json(manifest, out, "check.json", &report)?;
    if args.strict && !ok {
        eprintln!("error: anchored cutoff ordering fails on {} menus", {
            report.anchored_cutoffs_violations.len()
        });
        return Ok(2);
    }
    Ok(0)
}

// ---------------------------------------------------------------------------
// test-consideration
// ---------------------------------------------------------------------------

pub fn test_consideration(
    config: &Config,
    args: &CliArgs,
    manifest: &mut Manifest,
    out: &Path,
) -> Result<i32, CliError> {
    let (alphas, default_alt, d) = basic_mechanism_inputs(config)?;
    require_ntd(config)?;
    let dist = config.distribution()?;
    let nu_bar = config.distribution.nu_bar;
    let menu = LinearMenuMap::standard(d, nu_bar)?;
    let field = basic_arc_ntd_field(menu, alphas, default_alt, dist)?;

    let nu_star = args.nu_star.unwrap_or(0.8 * nu_bar);
    let t = Instant::now();
    // Two menu positions chosen so the riskiest alternative (then the
    // riskiest pair) is first best exactly below the threshold.
    let x_a = field.x_at_anchor_cutoff(1, nu_star)?;
    let x_b = field.x_at_pair_cutoff(1, 2, nu_star)?;
    let verdict =
        limited_consideration_test(&field, x_a, x_b, &[0], &[0, 1], nu_star, 1e-10, args.probes)?;
    manifest.timing("test", t);

    emit_json(manifest, out, "consideration-test.json", &verdict)?;
    Ok(0)
}

fn require_ntd(config: &Config) -> Result<(), CliError> {
    if config.model.family != "ntd" {
        return Err(CliError::Validation(
            "the identification lab runs on the quadratic (ntd) family; set [model] family accordingly"
                .into(),
        ));
    }
    Ok(())
}

fn basic_mechanism_inputs(config: &Config) -> Result<(Vec<f64>, usize, usize), CliError> {
    let m = &config.mechanism;
    if m.kind != "basic" && m.kind != "full" {
        return Err(CliError::Validation(
            "identification subcommands expect a basic (or full) mechanism in [mechanism]".into(),
        ));
    }
    let default_alt = m.default_alternative.or(config.model.default_alternative).unwrap_or(0);
    if m.kind == "full" {
        return Err(CliError::Validation(
            "give explicit inclusion rates under [mechanism] alphas".into(),
        ));
    }
    if m.alphas.len() < 3 {
        return Err(CliError::Validation(format!(
            "identification subcommands need at least 3 alternatives, got {}",
            m.alphas.len()
        )));
    }
    Ok((m.alphas.clone(), default_alt, m.alphas.len()))
}

// ---------------------------------------------------------------------------
// identify-demo
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct IdentifyReport {
    grid_points: usize,
    top_pair_mass: f64,
    riskiest_alpha: f64,
    recovered_alphas: Vec<f64>,
    unidentified: Vec<usize>,
    max_residual: f64,
    iterations: usize,
}

pub fn identify_demo(
    config: &Config,
    args: &CliArgs,
    manifest: &mut Manifest,
    out: &Path,
) -> Result<i32, CliError> {
    let (alphas, default_alt, d) = basic_mechanism_inputs(config)?;
    require_ntd(config)?;
    let dist = config.distribution()?;
    let nu_bar = config.distribution.nu_bar;
    let menu = LinearMenuMap::standard(d, nu_bar)?;
    let field = basic_arc_ntd_field(menu, alphas, default_alt, dist.clone())?;

    let t = Instant::now();
    let options = RecoveryOptions { grid_points: args.grid_points, ..RecoveryOptions::default() };
    let recovery = recover_density_sequential(&field, &options)?;
    let solved = recover_arc_parameters(&recovery)?;
    manifest.timing("recovery", t);

    let mut density = String::from("nu,recovered_density,true_density\n");
    for (&nu, &f) in recovery.grid.iter().zip(&recovery.density) {
        let _ = writeln!(density, "{nu},{f},{}", dist.pdf(nu));
    }
    emit_csv(manifest, out, "density.csv", &density)?;

    let report = IdentifyReport {
        grid_points: recovery.grid.len(),
        top_pair_mass: recovery.top_pair_mass,
        riskiest_alpha: recovery.riskiest_alpha,
        recovered_alphas: solved.alphas.clone(),
        unidentified: solved.unidentified.clone(),
        max_residual: solved.max_residual,
        iterations: solved.iterations,
    };
    emit_json(manifest, out, "identify.json", &report)?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// welfare
// ---------------------------------------------------------------------------

pub fn welfare(
    config: &Config,
    args: &CliArgs,
    manifest: &mut Manifest,
    out: &Path,
) -> Result<i32, CliError> {
    let data = load_data(args.data.as_ref().unwrap(), args.portfolio, manifest)?;
    let d = menu_size(&data)?;
    let model = ChoiceModel {
        family: config.family()?,
        dist: config.distribution()?,
        mechanism: config.mechanism(d)?,
    };
    let group_by: Vec<String> = args
        .group_by
        .as_deref()
        .map(|s| s.split(',').map(|p| p.trim().to_string()).filter(|p| !p.is_empty()).collect())
        .unwrap_or_default();

    let t = Instant::now();
    let table = aggregate_loss(&data, &model, &group_by)?;
    manifest.timing("welfare", t);

    let mut csv = String::from("group,households,mean,p10,p90\n");
    for row in &table.rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            row.group, row.households, row.mean, row.p10, row.p90
        );
    }
    emit_csv(manifest, out, "welfare.csv", &csv)?;
    emit_json(manifest, out, "welfare.json", &table)?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

pub fn report(
    config: &Config,
    args: &CliArgs,
    manifest: &mut Manifest,
    out: &Path,
) -> Result<i32, CliError> {
    let data = load_data(args.data.as_ref().unwrap(), args.portfolio, manifest)?;
    let d = menu_size(&data)?;
    let model = ChoiceModel {
        family: config.family()?,
        dist: config.distribution()?,
        mechanism: config.mechanism(d)?,
    };
    let kernel = config.kernel()?;

    // Predicted vs observed shares, overall and by premium-level bin.
    let t = Instant::now();
    let n = data.observations.len();
    let mut mean_premiums: Vec<(usize, f64)> = data
        .observations
        .iter()
        .enumerate()
        .map(|(i, obs)| {
            let ps: f64 =
                obs.context.alternatives.iter().map(|a| a.total_premium()).sum::<f64>();
            (i, ps / d as f64)
        })
        .collect();
    mean_premiums.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("finite premiums"));
    let bins = args.bins.max(1).min(n);
    let mut shares = String::from("bin,alternative,observed_share,predicted_share,households\n");
    for bin in 0..bins {
        let lo = bin * n / bins;
        let hi = ((bin + 1) * n / bins).max(lo + 1).min(n);
        let members = &mean_premiums[lo..hi];
        let mut observed = vec![0.0; d];
        let mut predicted = vec![0.0; d];
        for &(i, _) in members {
            let obs = &data.observations[i];
            observed[obs.choice] += 1.0;
            let probs = model.choice_probabilities(&obs.context, kernel)?;
            for (p, q) in predicted.iter_mut().zip(&probs) {
                *p += q;
            }
        }
        let m = members.len() as f64;
        for j in 0..d {
            let _ = writeln!(
                shares,
                "{bin},{j},{},{},{}",
                observed[j] / m,
                predicted[j] / m,
                members.len()
            );
        }
    }
    manifest.timing("shares", t);
    emit_csv(manifest, out, "shares.csv", &shares)?;

    // Average inclusion probability per alternative (consideration bars).
    let t = Instant::now();
    let nu_bar = config.distribution.nu_bar;
    let dist = config.distribution()?;
    let mut bars = String::from("alternative,mean_inclusion_probability\n");
    let grid = 512usize;
    let sample = &data.observations[0];
    let premiums: Vec<f64> =
        sample.context.alternatives.iter().map(|a| a.total_premium()).collect();
    let mctx = arcchoice::consider::MechContext {
        premiums: &premiums,
        demographics: &sample.context.demographics,
    };
    for j in 0..d {
        let mut mean = 0.0;
        let mut f_lo = 0.0;
        for i in 0..grid {
            let hi = nu_bar * (i + 1) as f64 / grid as f64;
            let f_hi = if i + 1 == grid { 1.0 } else { dist.cdf(hi) };
            let nu = nu_bar * (i as f64 + 0.5) / grid as f64;
            mean += (f_hi - f_lo) * model.mechanism.inclusion_probability(j, nu, &mctx)?;
            f_lo = f_hi;
        }
        let _ = writeln!(bars, "{j},{mean}");
    }
    manifest.timing("consideration_bars", t);
    emit_csv(manifest, out, "consideration.csv", &bars)?;

    // Risk-aversion density grid.
    let mut density = String::from("nu,density\n");
    for i in 0..args.grid_points {
        let nu = nu_bar * (i as f64 + 0.5) / args.grid_points as f64;
        let _ = writeln!(density, "{nu},{}", dist.pdf(nu));
    }
    emit_csv(manifest, out, "density.csv", &density)?;

    // Model fit at the configured parameters (not an estimate).
    let t = Instant::now();
    let ll = log_likelihood(&model, &data.observations, kernel)?;
    manifest.timing("log_likelihood", t);
    #[derive(Serialize)]
    struct FitSummary {
        households: usize,
        log_likelihood: f64,
        zero_probability_households: usize,
    }
    emit_json(
        manifest,
        out,
        "fit.json",
        &FitSummary {
            households: n,
            log_likelihood: ll.total,
            zero_probability_households: ll.zero_probability.len(),
        },
    )?;
    Ok(0)
}

/// Shared guard: relative-risk-aversion configs need positive wealth, and
/// the family name must parse, before any command does real work.
pub fn validate_family_config(config: &Config) -> Result<(), CliError> {
    if config.model.family == "crra" && config.model.wealth <= 0.0 {
        return Err(CliError::Validation("crra needs positive wealth in [model]".into()));
    }
    let _ = config.family()?;
    Ok(())
}
