//! Dataset types and CSV persistence.
//!
//! The single-line dataset contract is one row per household with columns,
//! in order:
//!
//! ```text
//! household_id, choice, mu, [pbar], p_1..p_D, d_1..d_D, z_<name>...
//! ```
//!
//! `choice` is 1-based in files (matching the `p_1..p_D` numbering) and
//! 0-based in memory. `pbar` may be omitted since premiums are explicit.
//! Simulation truth (risk aversion and the realized consideration set) lives
//! in a separate sidecar file so estimation code can never touch it.
//!
//! Multi-line (portfolio) datasets use an extended header with per-line
//! blocks (`mu_l`, `p<l>_j`, `d<l>_j`); the product menu is rebuilt with the
//! same deterministic enumeration the simulator uses.

use crate::context::{HouseholdContext, LineMenu};
use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

/// One household: its menu plus the observed choice (0-based).
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub household_id: u64,
    pub context: HouseholdContext,
    pub choice: usize,
}

/// A set of observations sharing one schema.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub observations: Vec<Observation>,
    /// Demographic column names without the `z_` prefix, in column order.
    pub demographic_names: Vec<String>,
}

/// Simulation truth for one household, stored separately from the dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthRecord {
    pub household_id: u64,
    pub nu: f64,
    /// Realized consideration set as a bitmask over menu indices.
    pub consideration_set: u128,
}

fn expected_header(d: usize, with_pbar: bool, demo: &[String]) -> Vec<String> {
    let mut h = vec!["household_id".to_string(), "choice".into(), "mu".into()];
    if with_pbar {
        h.push("pbar".into());
    }
    for j in 1..=d {
        h.push(format!("p_{j}"));
    }
    for j in 1..=d {
        h.push(format!("d_{j}"));
    }
    for name in demo {
        h.push(format!("z_{name}"));
    }
    h
}

/// Writes a single-line dataset with the standard column contract.
pub fn write_dataset_csv(path: &Path, ds: &Dataset) -> Result<()> {
    if ds.observations.is_empty() {
        return Err(Error::DataValidation("refusing to write an empty dataset".into()));
    }
    let d = ds.observations[0].context.n_alternatives();
    let with_pbar = ds.observations.iter().all(|o| o.context.pbar.is_some());
    if !with_pbar && ds.observations.iter().any(|o| o.context.pbar.is_some()) {
        return Err(Error::DataValidation(
            "either every household must carry a base price or none".into(),
        ));
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(expected_header(d, with_pbar, &ds.demographic_names))?;
    for obs in &ds.observations {
        let ctx = &obs.context;
        if ctx.n_alternatives() != d {
            return Err(Error::DataValidation("menu size varies across households".into()));
        }
        if ctx.demographics.len() != ds.demographic_names.len() {
            return Err(Error::DataValidation(
                "demographics length does not match the declared columns".into(),
            ));
        }
        if ctx.alternatives.iter().any(|a| a.legs.len() != 1) {
            return Err(Error::DataValidation(
                "the standard contract covers single-line menus; use the portfolio writer".into(),
            ));
        }
        let mut rec: Vec<String> = vec![
            obs.household_id.to_string(),
            (obs.choice + 1).to_string(),
            fmt_f64(ctx.claim_prob()),
        ];
        if with_pbar {
            rec.push(fmt_f64(ctx.pbar.expect("checked above")));
        }
        for j in 0..d {
            rec.push(fmt_f64(ctx.premium(j)));
        }
        for j in 0..d {
            rec.push(fmt_f64(ctx.deductible(j)));
        }
        for &z in &ctx.demographics {
            rec.push(fmt_f64(z));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Shortest round-trip decimal representation.
fn fmt_f64(x: f64) -> String {
    let mut s = String::new();
    write!(s, "{x}").expect("formatting cannot fail");
    s
}

struct SchemaShape {
    d: usize,
    with_pbar: bool,
    demo: Vec<String>,
}

fn parse_header(header: &csv::StringRecord) -> Result<SchemaShape> {
    let cols: Vec<&str> = header.iter().collect();
    let fail = |found: &[&str]| {
        let hint = expected_header(2, true, &["...".into()]).join(", ");
        Error::DataValidation(format!(
            "column layout mismatch: expected the sequence `{hint}` (p/d blocks sized to the menu, \
             pbar optional), found [{}]",
            found.join(", ")
        ))
    };
    let mut i = 0;
    let need = |name: &str, i: &mut usize| -> Result<()> {
        if cols.get(*i) != Some(&name) {
            return Err(fail(&cols));
        }
        *i += 1;
        Ok(())
    };
    need("household_id", &mut i)?;
    need("choice", &mut i)?;
    need("mu", &mut i)?;
    let with_pbar = cols.get(i) == Some(&"pbar");
    if with_pbar {
        i += 1;
    }
    let mut d = 0;
    while cols.get(i).is_some_and(|c| *c == format!("p_{}", d + 1)) {
        d += 1;
        i += 1;
    }
    if d == 0 {
        return Err(fail(&cols));
    }
    for j in 1..=d {
        need(&format!("d_{j}"), &mut i)?;
    }
    let mut demo = Vec::new();
    while i < cols.len() {
        match cols[i].strip_prefix("z_") {
            Some(name) => demo.push(name.to_string()),
            None => return Err(fail(&cols)),
        }
        i += 1;
    }
    Ok(SchemaShape { d, with_pbar, demo })
}

fn parse_f64(field: &str, col: &str, line: u64) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| {
        Error::DataValidation(format!("line {line}: cannot parse `{field}` in column {col}"))
    })
}

/// Reads a single-line dataset written with the standard contract.
pub fn read_dataset_csv(path: &Path) -> Result<Dataset> {
    let mut r = csv::Reader::from_path(path)?;
    let shape = parse_header(r.headers()?)?;
    let mut observations = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let expected_len =
            3 + usize::from(shape.with_pbar) + 2 * shape.d + shape.demo.len();
        if rec.len() != expected_len {
            return Err(Error::DataValidation(format!(
                "line {line}: expected {expected_len} fields, found {}",
                rec.len()
            )));
        }
        let mut i = 0;
        let mut next = |col: &str| -> &str {
            let v = &rec[i];
            let _ = col;
            i += 1;
            v
        };
        let household_id = next("household_id").trim().parse::<u64>().map_err(|_| {
            Error::DataValidation(format!("line {line}: household_id must be an integer"))
        })?;
        let choice_1 = next("choice").trim().parse::<usize>().map_err(|_| {
            Error::DataValidation(format!("line {line}: choice must be a positive integer"))
        })?;
        if choice_1 == 0 || choice_1 > shape.d {
            return Err(Error::DataValidation(format!(
                "line {line}: choice {choice_1} outside 1..={}",
                shape.d
            )));
        }
        let mu = parse_f64(next("mu"), "mu", line)?;
        let pbar = if shape.with_pbar { Some(parse_f64(next("pbar"), "pbar", line)?) } else { None };
        let mut premiums = Vec::with_capacity(shape.d);
        for j in 0..shape.d {
            premiums.push(parse_f64(next("p"), &format!("p_{}", j + 1), line)?);
        }
        let mut deductibles = Vec::with_capacity(shape.d);
        for j in 0..shape.d {
            deductibles.push(parse_f64(next("d"), &format!("d_{}", j + 1), line)?);
        }
        let mut demographics = Vec::with_capacity(shape.demo.len());
        for name in &shape.demo {
            demographics.push(parse_f64(next("z"), &format!("z_{name}"), line)?);
        }
        let mut context = HouseholdContext::single_line(mu, &premiums, &deductibles, demographics)
            .map_err(|e| Error::DataValidation(format!("line {line}: {e}")))?;
        context.pbar = pbar;
        observations.push(Observation { household_id, context, choice: choice_1 - 1 });
    }
    Ok(Dataset { observations, demographic_names: shape.demo })
}

/// Writes the simulation-truth sidecar.
pub fn write_truth_csv(path: &Path, records: &[TruthRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["household_id", "nu", "consideration_set"])?;
    for r in records {
        w.write_record(&[
            r.household_id.to_string(),
            fmt_f64(r.nu),
            r.consideration_set.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_truth_csv(path: &Path) -> Result<Vec<TruthRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<&str> = r.headers()?.iter().collect();
    if header != ["household_id", "nu", "consideration_set"] {
        return Err(Error::DataValidation(format!(
            "truth sidecar header mismatch: found [{}]",
            header.join(", ")
        )));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let household_id = rec[0].trim().parse::<u64>().map_err(|_| {
            Error::DataValidation(format!("line {line}: household_id must be an integer"))
        })?;
        let nu = parse_f64(&rec[1], "nu", line)?;
        let consideration_set = rec[2].trim().parse::<u128>().map_err(|_| {
            Error::DataValidation(format!("line {line}: consideration_set must be an integer"))
        })?;
        out.push(TruthRecord { household_id, nu, consideration_set });
    }
    Ok(out)
}

/// A portfolio dataset row: per-line menus plus the product-menu choice.
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioObservation {
    pub household_id: u64,
    pub lines: Vec<LineMenu>,
    pub demographics: Vec<f64>,
    /// Index into the product menu built by `HouseholdContext::from_lines`.
    pub choice: usize,
}

impl PortfolioObservation {
    /// Rebuilds the product-menu observation.
    pub fn to_observation(&self) -> Result<Observation> {
        let (context, _) = HouseholdContext::from_lines(&self.lines, self.demographics.clone())?;
        if self.choice >= context.n_alternatives() {
            return Err(Error::DataValidation(format!(
                "choice {} outside the product menu of {}",
                self.choice,
                context.n_alternatives()
            )));
        }
        Ok(Observation { household_id: self.household_id, context, choice: self.choice })
    }
}

/// Writes a multi-line dataset. All households must share line sizes.
pub fn write_portfolio_csv(
    path: &Path,
    rows: &[PortfolioObservation],
    demographic_names: &[String],
) -> Result<()> {
    let first = rows
        .first()
        .ok_or_else(|| Error::DataValidation("refusing to write an empty dataset".into()))?;
    let sizes: Vec<usize> = first.lines.iter().map(|l| l.premiums.len()).collect();
    let mut header = vec!["household_id".to_string(), "choice".into()];
    for l in 1..=sizes.len() {
        header.push(format!("mu_{l}"));
    }
    for (l, &dl) in sizes.iter().enumerate() {
        for j in 1..=dl {
            header.push(format!("p{}_{j}", l + 1));
        }
        for j in 1..=dl {
            header.push(format!("d{}_{j}", l + 1));
        }
    }
    for name in demographic_names {
        header.push(format!("z_{name}"));
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&header)?;
    for row in rows {
        let row_sizes: Vec<usize> = row.lines.iter().map(|l| l.premiums.len()).collect();
        if row_sizes != sizes || row.demographics.len() != demographic_names.len() {
            return Err(Error::DataValidation("portfolio schema varies across households".into()));
        }
        let mut rec = vec![row.household_id.to_string(), (row.choice + 1).to_string()];
        for line in &row.lines {
            rec.push(fmt_f64(line.claim_prob));
        }
        for line in &row.lines {
            for &p in &line.premiums {
                rec.push(fmt_f64(p));
            }
            for &d in &line.deductibles {
                rec.push(fmt_f64(d));
            }
        }
        for &z in &row.demographics {
            rec.push(fmt_f64(z));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a multi-line dataset written by `write_portfolio_csv`.
pub fn read_portfolio_csv(path: &Path) -> Result<(Vec<PortfolioObservation>, Vec<String>)> {
    let mut r = csv::Reader::from_path(path)?;
    let cols: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let fail = || Error::DataValidation(format!("portfolio header mismatch: [{}]", cols.join(", ")));
    if cols.first().map(String::as_str) != Some("household_id")
        || cols.get(1).map(String::as_str) != Some("choice")
    {
        return Err(fail());
    }
    let mut i = 2;
    let mut n_lines = 0;
    while cols.get(i).is_some_and(|c| *c == format!("mu_{}", n_lines + 1)) {
        n_lines += 1;
        i += 1;
    }
    if n_lines == 0 {
        return Err(fail());
    }
    let mut sizes = Vec::with_capacity(n_lines);
    for l in 1..=n_lines {
        let mut dl = 0;
        while cols.get(i).is_some_and(|c| *c == format!("p{l}_{}", dl + 1)) {
            dl += 1;
            i += 1;
        }
        if dl == 0 {
            return Err(fail());
        }
        for j in 1..=dl {
            if cols.get(i).map(String::as_str) != Some(&format!("d{l}_{j}") as &str) {
                return Err(fail());
            }
            i += 1;
        }
        sizes.push(dl);
    }
    let mut demo = Vec::new();
    while i < cols.len() {
        match cols[i].strip_prefix("z_") {
            Some(name) => demo.push(name.to_string()),
            None => return Err(fail()),
        }
        i += 1;
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line_no = rec.position().map(|p| p.line()).unwrap_or(0);
        let mut i = 0;
        let mut next = || {
            let v = rec[i].to_string();
            i += 1;
            v
        };
        let household_id = next().trim().parse::<u64>().map_err(|_| {
            Error::DataValidation(format!("line {line_no}: household_id must be an integer"))
        })?;
        let choice_1 = next().trim().parse::<usize>().map_err(|_| {
            Error::DataValidation(format!("line {line_no}: choice must be a positive integer"))
        })?;
        if choice_1 == 0 {
            return Err(Error::DataValidation(format!("line {line_no}: choice must be 1-based")));
        }
        let mut mus = Vec::with_capacity(n_lines);
        for l in 0..n_lines {
            mus.push(parse_f64(&next(), &format!("mu_{}", l + 1), line_no)?);
        }
        let mut lines = Vec::with_capacity(n_lines);
        for (l, &dl) in sizes.iter().enumerate() {
            let mut premiums = Vec::with_capacity(dl);
            for j in 0..dl {
                premiums.push(parse_f64(&next(), &format!("p{}_{}", l + 1, j + 1), line_no)?);
            }
            let mut deductibles = Vec::with_capacity(dl);
            for j in 0..dl {
                deductibles.push(parse_f64(&next(), &format!("d{}_{}", l + 1, j + 1), line_no)?);
            }
            lines.push(LineMenu { claim_prob: mus[l], premiums, deductibles });
        }
        let mut demographics = Vec::with_capacity(demo.len());
        for name in &demo {
            demographics.push(parse_f64(&next(), &format!("z_{name}"), line_no)?);
        }
        rows.push(PortfolioObservation { household_id, lines, demographics, choice: choice_1 - 1 });
    }
    Ok((rows, demo))
}
