//! Turns a validated config into checks, a JSON report and CSV tables.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{json, Value};
use shockwalk::exact::{
    proof_term_decomposition, single_shock_rates, verify_bcrw_stationary, verify_stationary, verify_theorem_3_1,
    verify_theorem_3_3, verify_theorem_5_1, VerificationReport, DEFAULT_PROBE_HALF_WIDTH,
};
use shockwalk::hydro::{
    flux, flux_of_theta, ladder_rates, multi_shock_velocity, random_ladder_agreement, rh_velocity, zrp_current,
    DensityLadder,
};
use shockwalk::measures::{
    asep_theta, bcrw_mixture_check, marginal, shift_identities, theta_of_rho, BcrwShockSpec, MultiShockSpec, ShockSpec,
    SiteField, Truncation,
};
use shockwalk::models::{bcrw_event_rates, check_attractivity, check_rate_consistency, Model};
use shockwalk::simulator::stats::within_band;
use shockwalk::simulator::{
    run_bcrw_tracking, run_multi_shock, run_shock_tracking, run_stationary_profile, TrackerResult,
};

use crate::config::{Check, Command, Expect, ExperimentConfig, MeasureConfig, OrientationConfig, Side};
use crate::error::CliError;

/// One reported number with the band it is judged against.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub quantity: String,
    pub value: f64,
    pub target: f64,
    /// `<=`, `>=`, `>`: value compared with `band`;
    /// `within`: `|value - target| <= band`.
    pub relation: &'static str,
    pub band: f64,
    pub pass: bool,
}

impl CheckRow {
    fn at_most(quantity: impl Into<String>, value: f64, band: f64) -> Self {
        Self {
            quantity: quantity.into(),
            value,
            target: 0.0,
            relation: "<=",
            band,
            pass: value <= band,
        }
    }

    fn at_least(quantity: impl Into<String>, value: f64, band: f64) -> Self {
        Self {
            quantity: quantity.into(),
            value,
            target: 0.0,
            relation: ">=",
            band,
            pass: value >= band,
        }
    }

    fn above(quantity: impl Into<String>, value: f64, band: f64) -> Self {
        Self {
            quantity: quantity.into(),
            value,
            target: 0.0,
            relation: ">",
            band,
            pass: value > band,
        }
    }

    fn within(quantity: impl Into<String>, value: f64, target: f64, band: f64) -> Self {
        Self {
            quantity: quantity.into(),
            value,
            target,
            relation: "within",
            band,
            pass: (value - target).abs() <= band,
        }
    }
}

/// A CSV file: name, header and rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(file: &str, header: &[&'static str]) -> Self {
        Self {
            file: file.into(),
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub name: String,
    pub command: Command,
    pub model: String,
    pub checks: Vec<CheckRow>,
    pub details: Value,
    pub tables: Vec<Table>,
}

impl Outcome {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn report(&self, config: &ExperimentConfig) -> Value {
        json!({
            "name": self.name,
            "command": self.command,
            "model": self.model,
            "pass": self.pass(),
            "checks": self.checks,
            "details": self.details,
            "config": config,
        })
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let model = cfg.model.build()?;
    let mut out = Outcome {
        name: cfg.label(),
        command: cfg.command,
        model: model.name().into(),
        checks: Vec::new(),
        details: Value::Null,
        tables: Vec::new(),
    };
    match cfg.command {
        Command::Verify => verify(cfg, &model, &mut out)?,
        Command::Simulate => simulate(cfg, &model, &mut out)?,
        Command::Hydro => hydro(cfg, &model, &mut out)?,
        Command::RatesCheck => rates_check(&model, &mut out)?,
    }
    Ok(out)
}

fn shock_spec(model: &Model, m: &MeasureConfig, trunc: &Truncation) -> Result<ShockSpec, CliError> {
    let MeasureConfig::Shock {
        rho,
        lambda,
        theta,
        sigma,
        j,
        unchecked,
    } = m
    else {
        return Err(CliError::Config("this check needs a shock measure".into()));
    };
    let (theta, sigma) = match (theta, sigma) {
        (Some(t), Some(s)) => (*t, *s),
        _ => (
            asep_theta(rho.unwrap_or(f64::NAN))?,
            asep_theta(lambda.unwrap_or(f64::NAN))?,
        ),
    };
    Ok(if *unchecked {
        ShockSpec::new_unchecked(model, theta, sigma, *j, trunc)?
    } else {
        ShockSpec::build(model, theta, sigma, *j, trunc)?
    })
}

fn particle_map(particles: &[i32]) -> BTreeMap<i32, i64> {
    let mut m = BTreeMap::new();
    for &x in particles {
        *m.entry(x).or_insert(0) += 1;
    }
    m
}

/// The multi-shock measure, perturbed after construction if asked.
fn multi_spec(model: &Model, m: &MeasureConfig, trunc: &Truncation) -> Result<MultiShockSpec, CliError> {
    let MeasureConfig::MultiShock {
        particles,
        densities,
        sigma_right,
        sigma_left,
        perturb,
    } = m
    else {
        return Err(CliError::Config("this check needs a multi-shock measure".into()));
    };
    let map = particle_map(particles);
    let mut spec = if let Some(rho) = densities {
        // density at site i is rho_k with k the number of particles at sites <= i
        let (lo, hi) = (*map.keys().next().unwrap(), *map.keys().last().unwrap());
        let mut k = 0usize;
        let mut values = Vec::new();
        for i in lo..=hi {
            k += map.get(&i).copied().unwrap_or(0) as usize;
            values.push(rho[k]);
        }
        let field = SiteField {
            start: lo,
            values,
            left: rho[0],
            right: rho[rho.len() - 1],
        };
        MultiShockSpec::asep_from_densities(model, &field, &map)?
    } else if let Some(s) = sigma_right {
        MultiShockSpec::from_right_parameter(model, *s, &map, trunc)?
    } else {
        MultiShockSpec::from_left_parameter(model, sigma_left.unwrap_or(f64::NAN), &map, trunc)?
    };
    let asep = matches!(model, Model::Asep { .. });
    let scale = |v: f64, factor: f64| -> Result<f64, CliError> {
        if asep {
            let rho = 1.0 / (1.0 + (-v).exp());
            Ok(asep_theta(rho * factor)?)
        } else {
            Ok(v * factor)
        }
    };
    for p in perturb {
        match (p.site, p.side) {
            (Some(i), _) => {
                let v = scale(spec.sigma.get(i), p.factor)?;
                spec.sigma.set(i, v);
            }
            (_, Some(Side::Left)) => spec.sigma.left = scale(spec.sigma.left, p.factor)?,
            (_, Some(Side::Right)) => spec.sigma.right = scale(spec.sigma.right, p.factor)?,
            _ => unreachable!("validated"),
        }
    }
    Ok(spec)
}

fn bcrw_spec(model: &Model, m: &MeasureConfig) -> Result<BcrwShockSpec, CliError> {
    let MeasureConfig::BcrwShock { j, orientation } = m else {
        return Err(CliError::Config("this check needs a bcrw-shock measure".into()));
    };
    let model = match orientation {
        OrientationConfig::Right => *model,
        OrientationConfig::Mirror => Model::bcrw(model.bcrw_rates()?.mirrored())?,
    };
    Ok(BcrwShockSpec::new(&model, *j, (*orientation).into())?)
}

fn stationary_thetas(model: &Model, m: &MeasureConfig, trunc: &Truncation) -> Result<Vec<f64>, CliError> {
    let MeasureConfig::Stationary { theta, rho } = m else {
        return Err(CliError::Config("this check needs a stationary measure".into()));
    };
    if let Some(t) = theta {
        return Ok(t.to_vec());
    }
    let rhos = rho.as_ref().map(|r| r.to_vec()).unwrap_or_default();
    rhos.iter()
        .map(|&r| match model {
            Model::Asep { .. } => asep_theta(r),
            _ => theta_of_rho(model, r, trunc),
        })
        .collect::<shockwalk::Result<_>>()
        .map_err(CliError::from)
}

fn residual_table(reports: &[&VerificationReport], budget_ok: f64) -> Table {
    let mut t = Table::new(
        "residuals.csv",
        &[
            "report",
            "index",
            "config",
            "lhs",
            "rhs",
            "residual",
            "tolerance",
            "truncation_budget",
        ],
    );
    for (k, r) in reports.iter().enumerate() {
        for res in &r.residuals {
            t.push(vec![
                k.to_string(),
                res.index.to_string(),
                res.config.clone(),
                num(res.lhs),
                num(res.rhs),
                num(res.residual),
                num(budget_ok),
                num(r.truncation_budget),
            ]);
        }
    }
    t
}

fn identity_checks(cfg: &ExperimentConfig, r: &VerificationReport, label: &str, out: &mut Outcome) {
    let tol = cfg.exact.tolerance.unwrap_or(r.tolerance);
    let row = match cfg.exact.expect {
        Expect::Pass => CheckRow::at_most(
            format!("{label}max residual (tolerance + truncation budget)"),
            r.max_residual,
            tol + r.truncation_budget,
        ),
        Expect::Fail => CheckRow::above(
            format!("{label}max residual (negative control)"),
            r.max_residual,
            cfg.exact.fail_threshold,
        ),
    };
    out.checks.push(row);
}

fn verify(cfg: &ExperimentConfig, model: &Model, out: &mut Outcome) -> Result<(), CliError> {
    let e = &cfg.exact;
    let trunc = e.trunc()?;
    let engine = e.engine();
    if e.check == Check::Shift {
        let mut t = Table::new(
            "shift.csv",
            &["theta", "z_defect", "rho_defect", "pmf_defect", "budget", "rho_budget"],
        );
        let mut reports = Vec::new();
        for &theta in &e.thetas {
            let r = shift_identities(model, theta, &trunc)?;
            out.checks.push(CheckRow::at_most(
                format!("theta {theta}: Z shift (relative)"),
                r.z_defect,
                r.budget,
            ));
            out.checks.push(CheckRow::at_most(
                format!("theta {theta}: density shift"),
                r.rho_defect,
                r.rho_budget,
            ));
            out.checks.push(CheckRow::at_most(
                format!("theta {theta}: pmf shift"),
                r.pmf_defect,
                r.budget,
            ));
            t.push(vec![
                num(theta),
                num(r.z_defect),
                num(r.rho_defect),
                num(r.pmf_defect),
                num(r.budget),
                num(r.rho_budget),
            ]);
            reports.push(r);
        }
        out.details = serde_json::to_value(reports)?;
        out.tables.push(t);
        return Ok(());
    }
    let measure = cfg.measure.as_ref().expect("validated");
    match (e.check, measure) {
        (Check::Identity, MeasureConfig::Shock { .. }) => {
            let r = verify_theorem_3_1(&shock_spec(model, measure, &trunc)?, e.window, &engine)?;
            identity_checks(cfg, &r, "", out);
            out.tables
                .push(residual_table(&[&r], cfg.exact.tolerance.unwrap_or(r.tolerance)));
            out.details = serde_json::to_value(&r)?;
        }
        (Check::Identity, MeasureConfig::MultiShock { .. }) => {
            let r = verify_theorem_3_3(&multi_spec(model, measure, &trunc)?, e.window, &engine)?;
            identity_checks(cfg, &r, "", out);
            out.tables
                .push(residual_table(&[&r], cfg.exact.tolerance.unwrap_or(r.tolerance)));
            out.details = serde_json::to_value(&r)?;
        }
        (Check::Identity, MeasureConfig::BcrwShock { .. }) => {
            let r = verify_theorem_5_1(&bcrw_spec(model, measure)?, e.window, &engine)?;
            identity_checks(cfg, &r, "", out);
            out.tables
                .push(residual_table(&[&r], cfg.exact.tolerance.unwrap_or(r.tolerance)));
            out.details = serde_json::to_value(&r)?;
        }
        (Check::Identity, MeasureConfig::Stationary { rho, .. }) => {
            let mut reports = Vec::new();
            if let Model::Bcrw(_) = model {
                for r in rho.as_ref().map(|v| v.to_vec()).unwrap_or_default() {
                    reports.push((
                        format!("rho {r}: "),
                        verify_bcrw_stationary(model, r, e.window, &engine)?,
                    ));
                }
            } else {
                for theta in stationary_thetas(model, measure, &trunc)? {
                    reports.push((
                        format!("theta {theta:.6}: "),
                        verify_stationary(model, theta, e.window, &trunc, &engine)?,
                    ));
                }
            }
            for (label, r) in &reports {
                identity_checks(cfg, r, label, out);
            }
            let refs: Vec<&VerificationReport> = reports.iter().map(|(_, r)| r).collect();
            let tol = refs
                .first()
                .map(|r| cfg.exact.tolerance.unwrap_or(r.tolerance))
                .unwrap_or(0.0);
            out.tables.push(residual_table(&refs, tol));
            out.details = serde_json::to_value(refs)?;
        }
        (Check::ProofTerms, MeasureConfig::Shock { .. }) => {
            let spec = shock_spec(model, measure, &trunc)?;
            let r = proof_term_decomposition(&spec, e.probe_half_width.unwrap_or(DEFAULT_PROBE_HALF_WIDTH))?;
            let tol = e.tolerance.unwrap_or(r.tolerance);
            out.checks
                .push(CheckRow::at_most("B+D spread over probes", r.b_plus_d.spread, tol));
            out.checks
                .push(CheckRow::within("B+D against Q", r.b_plus_d.max, r.q_rate, tol));
            out.checks
                .push(CheckRow::at_most("max |B+D - Q|", r.b_plus_d.defect, tol));
            out.checks
                .push(CheckRow::at_most("C+E spread over probes", r.c_plus_e.spread, tol));
            out.checks
                .push(CheckRow::at_most("max |C+E - P|", r.c_plus_e.defect, tol));
            out.checks.push(CheckRow::within(
                "E_0(A) against -P-Q",
                r.expected_a,
                r.expected_a_target,
                tol,
            ));
            out.details = serde_json::to_value(&r)?;
        }
        (Check::Mixture, MeasureConfig::Shock { .. }) => {
            let r = shock_spec(model, measure, &trunc)?.mixture_check(e.window)?;
            out.checks.push(CheckRow::at_most(
                "single shock mixture: max deviation",
                r.max_deviation,
                e.tolerance.unwrap_or(1e-14),
            ));
            out.details = serde_json::to_value(&r)?;
        }
        (Check::Mixture, MeasureConfig::BcrwShock { j, .. }) => {
            let r = bcrw_mixture_check(model.bcrw_rates()?, *j, e.window)?;
            out.checks.push(CheckRow::at_most(
                "BCRW geometric mixture: max deviation",
                r.max_deviation,
                e.tolerance.unwrap_or(1e-14),
            ));
            out.details = serde_json::to_value(&r)?;
        }
        (check, _) => {
            return Err(CliError::Config(format!(
                "exact.check {check:?} is not available for this measure kind"
            )))
        }
    }
    Ok(())
}

fn summary(r: &TrackerResult) -> Value {
    json!({
        "replicas": r.replicas,
        "included": r.replica_ids.len(),
        "sample_times": r.sample_times,
        "displacement": r.displacement,
        "prediction": r.prediction,
        "predicted_velocity": r.predicted_velocity,
        "velocity": r.velocity,
        "tv_distance": r.tv_distance,
        "chi_square": r.chi_square,
        "flagged": r.flagged,
        "capped": r.capped,
        "absorbed": r.absorbed,
        "events": r.events,
        "gaps": r.gaps,
        "profile": r.profile,
    })
}

fn simulate(cfg: &ExperimentConfig, model: &Model, out: &mut Outcome) -> Result<(), CliError> {
    let sim = &cfg.simulation;
    let run = &sim.run;
    let trunc = cfg.exact.trunc()?;
    let measure = cfg.measure.as_ref().expect("validated");
    let mut flat_density = None;
    let r = match measure {
        MeasureConfig::Shock { .. } => run_shock_tracking(&shock_spec(model, measure, &trunc)?, run)?,
        MeasureConfig::BcrwShock { .. } => run_bcrw_tracking(&bcrw_spec(model, measure)?, run)?,
        MeasureConfig::MultiShock { .. } => run_multi_shock(&multi_spec(model, measure, &trunc)?, run, sim.gap_init)?,
        MeasureConfig::Stationary { .. } => {
            let thetas = stationary_thetas(model, measure, &trunc)?;
            let [theta] = thetas[..] else {
                return Err(CliError::Config("simulate takes a single stationary parameter".into()));
            };
            flat_density = Some(marginal(model, theta, &trunc)?.mean());
            run_stationary_profile(model, theta, &trunc, run)?
        }
    };
    let b = &sim.bands;
    let d = &r.displacement;
    if let Some(w) = r.prediction {
        out.checks.push(CheckRow::within(
            "displacement mean",
            d.mean,
            w.mean,
            b.mean_se * d.se_mean,
        ));
        if let Some(k) = b.variance_se {
            out.checks.push(CheckRow::within(
                "displacement variance",
                d.variance,
                w.variance,
                k * d.se_variance,
            ));
        }
        if let Some(tv) = b.tv {
            out.checks.push(CheckRow::at_most(
                "TV distance to the walk law",
                r.tv_distance.unwrap_or(f64::NAN),
                tv,
            ));
        }
    }
    if let Some(v) = b
        .velocity
        .or((r.prediction.is_none() && flat_density.is_none()).then_some(r.predicted_velocity))
    {
        let v_ok = within_band(r.velocity.mean, v, r.velocity.se_mean, b.velocity_se);
        let mut row = CheckRow::within("velocity", r.velocity.mean, v, b.velocity_se * r.velocity.se_mean);
        row.pass = v_ok;
        out.checks.push(row);
    }
    if let Some(rho) = flat_density {
        for p in &r.profile {
            out.checks.push(CheckRow::within(
                format!("profile at offset {}", p.offset),
                p.mean,
                rho,
                b.mean_se * p.se,
            ));
        }
    }
    out.checks.push(CheckRow::at_most(
        "boundary-flagged fraction",
        r.flagged_fraction(),
        run.max_flagged_fraction,
    ));

    let n = r.replica_ids.len() as f64;
    if cfg.output.trajectories.unwrap_or(true) && flat_density.is_none() {
        let mut t = Table::new("trajectories.csv", &["replica", "t", "tracked_position"]);
        for (id, traj) in r.replica_ids.iter().zip(&r.trajectories) {
            for (time, x) in r.sample_times.iter().zip(traj) {
                t.push(vec![id.to_string(), time.to_string(), x.to_string()]);
            }
        }
        out.tables.push(t);
    }
    if !r.pmf.is_empty() {
        let mut t = Table::new(
            "histogram.csv",
            &[
                "position",
                "count",
                "empirical",
                "empirical_se",
                "predicted_probability",
            ],
        );
        for row in &r.pmf {
            let se = (row.predicted_probability * (1.0 - row.predicted_probability) / n).sqrt();
            t.push(vec![
                row.position.to_string(),
                row.count.to_string(),
                num(row.empirical),
                num(se),
                num(row.predicted_probability),
            ]);
        }
        out.tables.push(t);
    }
    if !r.gaps.is_empty() {
        let mut t = Table::new(
            "gaps.csv",
            &["distance", "count", "fraction", "fraction_se", "predicted"],
        );
        let total: u64 = r.gaps.iter().map(|g| g.count).sum();
        for g in &r.gaps {
            let se = (g.fraction * (1.0 - g.fraction) / total as f64).sqrt();
            t.push(vec![
                g.distance.to_string(),
                g.count.to_string(),
                num(g.fraction),
                num(se),
                g.predicted.map(num).unwrap_or_default(),
            ]);
        }
        out.tables.push(t);
    }
    if !r.profile.is_empty() {
        let mut t = Table::new("profile.csv", &["offset", "mean", "se"]);
        for p in &r.profile {
            t.push(vec![p.offset.to_string(), num(p.mean), num(p.se)]);
        }
        out.tables.push(t);
    }
    out.details = summary(&r);
    Ok(())
}

fn hydro(cfg: &ExperimentConfig, model: &Model, out: &mut Outcome) -> Result<(), CliError> {
    let h = &cfg.hydro;
    let trunc = cfg.exact.trunc()?;
    let mut details = serde_json::Map::new();
    let mut vt = Table::new("velocities.csv", &["quantity", "value", "target", "band"]);
    let mut add = |out: &mut Outcome, row: CheckRow| {
        vt.push(vec![
            row.quantity.clone(),
            num(row.value),
            num(row.target),
            num(row.band),
        ]);
        out.checks.push(row);
    };

    if let Some(rho) = &h.ladder {
        let Model::Asep { p, q } = *model else {
            return Err(CliError::Config("hydro.ladder needs an ASEP model".into()));
        };
        let ladder = DensityLadder::new(p, q, rho.clone())?;
        let (ps, qs) = ladder_rates(p, q, &ladder)?;
        let current = zrp_current(&ps, &qs)?;
        let closed = multi_shock_velocity(p, q, rho[0], rho[rho.len() - 1])?;
        let rel = ((current - closed) / closed).abs();
        add(
            out,
            CheckRow::at_most("ladder: relative |current - closed form|", rel, h.relative_tolerance),
        );
        if let Some(v) = h.expected_velocity {
            add(
                out,
                CheckRow::within("ladder: bound-state current", current, v, h.velocity_tolerance),
            );
            add(
                out,
                CheckRow::within("ladder: closed-form velocity", closed, v, h.velocity_tolerance),
            );
        }
        details.insert(
            "ladder".into(),
            json!({ "rho": rho, "p_rates": ps, "q_rates": qs, "current": current, "closed_form": closed }),
        );
    }
    if h.random_ladders > 0 {
        let a = random_ladder_agreement(h.random_ladders, h.seed)?;
        add(
            out,
            CheckRow::at_most(
                format!("{} random ladders: max relative |current - closed form|", a.ladders),
                a.max_relative_difference,
                h.relative_tolerance,
            ),
        );
        details.insert("random_ladders".into(), serde_json::to_value(&a)?);
    }
    if h.drift {
        let spec = shock_spec(model, cfg.measure.as_ref().expect("validated"), &trunc)?;
        let (pr, qr) = single_shock_rates(&spec)?;
        let (rl, rr) = spec.densities();
        let v = rh_velocity(model, rl, rr, &trunc)?;
        // densities carry the truncation error of both marginals
        let band = h.drift_tolerance + 10.0 * (spec.left.weighted_tail_bound + spec.right.weighted_tail_bound);
        add(
            out,
            CheckRow::within("shock drift P - Q against Rankine-Hugoniot velocity", pr - qr, v, band),
        );
        details.insert(
            "drift".into(),
            json!({ "P": pr, "Q": qr, "rho_left": rl, "rho_right": rr, "rh_velocity": v }),
        );
    }
    out.tables.push(vt);
    if let Some(g) = &h.flux {
        let mut t = Table::new("flux.csv", &["parameter", "rho", "flux", "tail_bound"]);
        for k in 0..g.points {
            let x = g.from + (g.to - g.from) * k as f64 / (g.points - 1) as f64;
            match model {
                Model::Asep { .. } => t.push(vec![num(x), num(x), num(flux(model, x, &trunc)?), num(0.0)]),
                _ => {
                    let m = marginal(model, x, &trunc)?;
                    t.push(vec![
                        num(x),
                        num(m.mean()),
                        num(flux_of_theta(model, x)?),
                        num(m.tail_bound),
                    ]);
                }
            }
        }
        out.tables.push(t);
    }
    out.details = Value::Object(details);
    Ok(())
}

fn rates_check(model: &Model, out: &mut Outcome) -> Result<(), CliError> {
    if let Model::Bcrw(rates) = model {
        let mut smallest = f64::INFINITY;
        for (l, r) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            for (_, rate) in bcrw_event_rates(rates, l, r)? {
                smallest = smallest.min(rate);
            }
        }
        out.checks
            .push(CheckRow::at_least("smallest event rate", smallest, 0.0));
        out.details = json!({ "rates": rates, "stationary_density": rates.stationary_density() });
        return Ok(());
    }
    let g = model.growth()?;
    let probe = model.default_probe_range();
    let a = check_attractivity(&g, probe.clone());
    let c = check_rate_consistency(&g, probe);
    out.checks.push(CheckRow::at_most(
        "attractivity violations",
        a.violations.len() as f64,
        0.0,
    ));
    out.checks.push(CheckRow::at_most(
        "cyclic rate defect (scaled)",
        c.max_cyclic_defect,
        c.tolerance,
    ));
    out.checks.push(CheckRow::at_most(
        "factorization defect (scaled)",
        c.max_symmetry_defect,
        c.tolerance,
    ));
    out.checks.push(CheckRow::at_most(
        "boundary violations",
        c.boundary_violations.len() as f64,
        0.0,
    ));
    out.details = json!({ "attractivity": a, "consistency": c });
    Ok(())
}
