//! Subcommand implementations.
//!
//! Every command writes its reports under the output directory and returns a
//! process exit code: 0 on success, 3 when results were produced but some
//! iteration did not reach tolerance (outputs are still written). Input and
//! setup errors bubble up as `Err` and exit with code 2.

use std::f64::consts::PI;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use holoifs::expr::{parse, ExprAst};
use holoifs::grid::{self, fmt_sig, l1_distance, node_x};
use holoifs::holonomic::{
    default_test_battery, holonomic_inequality_defect, holonomy_defect, make_orbit_measure,
    marginal_invariance_defect, monomial_tests, sigma_invariance_defect, Word,
};
use holoifs::operator::{check_markov, normalize_system, spectral_triple};
use holoifs::sim::{birkhoff_average, chaos_game, default_burn_in, empirical_measure};
use holoifs::thermo::{
    beta_sweep, entropy_alt, entropy_inf, lifted_equilibrium, pressure_spectral,
    pressure_variational, EntropyMethod,
};
use holoifs::{
    DescentOptions, GridFunction, HolonomicMeasure, Psi, SpectralTriple, WeightedSystem, Weights,
};

use crate::config::{CandidateSpec, Config, WeightMode};
use crate::report::{write_bytes, write_json, write_text, Json};

/// Tolerance used by the PASS/FAIL lines of `verify`. Well above the
/// numerical floor of the grid defects, well below any genuine violation.
const VERIFY_TOL: f64 = 1e-6;
/// A weight system counts as stochastic when its row sums stay this close
/// to one at the grid nodes.
const MARKOV_TOL: f64 = 1e-8;
/// Maximum number of rows written to `trajectory.csv`.
const MAX_TRAJECTORY_ROWS: usize = 10_000;

/// Resolved run settings: config plus command-line overrides.
pub struct Ctx {
    pub cfg: Config,
    pub out: PathBuf,
    pub grid_n: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub beta: Option<f64>,
}

/// A named measure candidate ready for scoring.
struct Candidate {
    label: String,
    spec_json: Json,
    measure: HolonomicMeasure,
    /// False when building the candidate needed an eigensolve that stalled.
    converged: bool,
    word: Option<Word>,
}

impl Ctx {
    fn build_system(&self) -> Result<WeightedSystem> {
        let maps = self.parse_maps()?;
        let weights = match self.cfg.weight_mode {
            WeightMode::PerMap => {
                let exprs = self
                    .cfg
                    .u
                    .as_ref()
                    .context("per_map mode needs the `u` weight list")?
                    .iter()
                    .enumerate()
                    .map(|(i, s)| parse(s).with_context(|| format!("weight u[{i}]: {s:?}")))
                    .collect::<Result<Vec<_>>>()?;
                Weights::PerMapExpr(exprs)
            }
            WeightMode::WeightFunction => {
                let phi = self.cfg.phi.as_ref().context("missing `phi`")?;
                Weights::Potential(parse(phi).with_context(|| format!("phi: {phi:?}"))?)
            }
        };
        Ok(WeightedSystem::new(maps, weights, self.grid_n)?)
    }

    fn parse_maps(&self) -> Result<Vec<ExprAst>> {
        self.cfg
            .maps
            .iter()
            .enumerate()
            .map(|(i, s)| parse(s).with_context(|| format!("map tau[{i}]: {s:?}")))
            .collect()
    }

    fn potential(&self) -> Result<ExprAst> {
        match self.cfg.weight_mode {
            WeightMode::WeightFunction => {
                let phi = self.cfg.phi.as_ref().context("missing `phi`")?;
                parse(phi).with_context(|| format!("phi: {phi:?}"))
            }
            WeightMode::PerMap => {
                bail!("this command needs weight_mode = \"weight_function\" (a single phi)")
            }
        }
    }

    fn psi(&self) -> Result<Psi> {
        match &self.cfg.psi {
            Some(s) => Ok(Psi::Expr(parse(s).with_context(|| format!("psi: {s:?}"))?)),
            None => Ok(Psi::one()),
        }
    }

    fn descent_opts(&self) -> DescentOptions {
        // Grid problems have a long gradient tail; give the CLI a larger
        // budget than the library default so routine runs finish converged.
        DescentOptions {
            max_iter: 50_000,
            ..DescentOptions::default()
        }
    }

    fn candidate_specs(&self) -> Vec<CandidateSpec> {
        self.cfg
            .candidates
            .clone()
            .unwrap_or_else(|| vec![CandidateSpec::Keyword("lifted".into())])
    }

    /// Builds every configured candidate on top of `sys`. The `lifted`
    /// keyword means: normalize the system at the leading eigendata and take
    /// the stationary lift of the normalized weights.
    fn build_candidates(&self, sys: &WeightedSystem) -> Result<Vec<Candidate>> {
        let mut out = Vec::new();
        for spec in self.candidate_specs() {
            match spec {
                CandidateSpec::Keyword(_) => {
                    let eq = lifted_equilibrium(sys, self.grid_n, self.tol, self.max_iter)?;
                    out.push(Candidate {
                        label: "lifted".into(),
                        spec_json: Json::Obj(vec![("kind".into(), Json::str("lifted"))]),
                        converged: eq.triple.converged(),
                        measure: HolonomicMeasure::Lifted(eq.measure),
                        word: None,
                    });
                }
                CandidateSpec::Orbit {
                    x0,
                    preperiod,
                    period,
                } => {
                    let word = Word::new(preperiod.clone(), period.clone())?;
                    let atoms = if preperiod.is_empty() {
                        period.len()
                    } else {
                        preperiod.len()
                    };
                    let om = make_orbit_measure(sys, x0, &word, atoms)?;
                    out.push(Candidate {
                        label: format!("orbit x0={x0} word={}", word_string(&word)),
                        spec_json: Json::Obj(vec![
                            ("kind".into(), Json::str("orbit")),
                            ("x0".into(), Json::Num(x0)),
                            ("preperiod".into(), digits_json(&preperiod)),
                            ("period".into(), digits_json(&period)),
                        ]),
                        converged: true,
                        measure: HolonomicMeasure::Orbit(om),
                        word: Some(word),
                    });
                }
            }
        }
        Ok(out)
    }
}

fn digits_json(digits: &[u8]) -> Json {
    Json::Arr(digits.iter().map(|&d| Json::Int(d as i64)).collect())
}

fn word_string(w: &Word) -> String {
    let part = |ds: &[u8]| {
        ds.iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join("")
    };
    format!("{}({})", part(w.preperiod()), part(w.period()))
}

fn warnings_json(warnings: &[impl std::fmt::Display]) -> Json {
    Json::Arr(warnings.iter().map(|w| Json::str(w.to_string())).collect())
}

fn triple_json(triple: &SpectralTriple) -> Json {
    Json::Obj(vec![
        ("rho".into(), Json::Num(triple.rho)),
        ("residual_h".into(), Json::Num(triple.residual_h)),
        ("residual_nu".into(), Json::Num(triple.residual_nu)),
        ("rayleigh_gap".into(), Json::Num(triple.rayleigh_gap)),
        ("iterations".into(), Json::Int(triple.iterations as i64)),
        ("converged".into(), Json::Bool(triple.converged())),
        ("warnings".into(), warnings_json(&triple.warnings)),
    ])
}

fn settings_json(ctx: &Ctx) -> Json {
    Json::Obj(vec![
        ("grid_n".into(), Json::Int(ctx.grid_n as i64)),
        ("tol".into(), Json::Num(ctx.tol)),
        ("max_iter".into(), Json::Int(ctx.max_iter as i64)),
    ])
}

fn exit_code(all_converged: bool) -> i32 {
    if all_converged {
        0
    } else {
        3
    }
}

// --- spectrum ---------------------------------------------------------------

pub fn spectrum(ctx: &Ctx) -> Result<i32> {
    let sys = ctx.build_system()?;
    let triple = spectral_triple(&sys, ctx.grid_n, ctx.tol, ctx.max_iter)?;

    let mut buf = Vec::new();
    grid::write_function_csv(&triple.h, &mut buf)?;
    write_bytes(&ctx.out, "h.csv", &buf)?;
    let mut buf = Vec::new();
    grid::write_measure_csv(&triple.nu, &mut buf)?;
    write_bytes(&ctx.out, "nu.csv", &buf)?;

    let report = Json::Obj(vec![
        ("settings".into(), settings_json(ctx)),
        ("rho".into(), Json::Num(triple.rho)),
        ("log_rho".into(), Json::Num(triple.rho.ln())),
        ("residual_h".into(), Json::Num(triple.residual_h)),
        ("residual_nu".into(), Json::Num(triple.residual_nu)),
        ("rayleigh_gap".into(), Json::Num(triple.rayleigh_gap)),
        ("iterations".into(), Json::Int(triple.iterations as i64)),
        ("converged".into(), Json::Bool(triple.converged())),
        ("warnings".into(), warnings_json(&triple.warnings)),
    ]);
    write_json(&ctx.out, "spectrum.json", &report)?;

    println!(
        "rho = {} after {} iterations (residual_h = {}, converged = {})",
        fmt_sig(triple.rho),
        triple.iterations,
        fmt_sig(triple.residual_h),
        triple.converged()
    );
    Ok(exit_code(triple.converged()))
}

// --- normalize --------------------------------------------------------------

pub fn normalize(ctx: &Ctx) -> Result<i32> {
    let sys = ctx.build_system()?;
    let n = ctx.grid_n;
    let triple = spectral_triple(&sys, n, ctx.tol, ctx.max_iter)?;
    let (normalized, mu) = normalize_system(&sys, &triple)?;
    let markov_defect = check_markov(&normalized, n)?;

    let d = normalized.branch_count();
    let mut csv = String::from("x");
    for i in 0..d {
        csv.push_str(&format!(",v_{i}"));
    }
    csv.push('\n');
    for j in 0..=n {
        let x = node_x::<f64>(j, n);
        csv.push_str(&fmt_sig(x));
        for i in 0..d {
            csv.push(',');
            csv.push_str(&fmt_sig(normalized.weight(i, x)?));
        }
        csv.push('\n');
    }
    write_text(&ctx.out, "v.csv", &csv)?;

    let mut buf = Vec::new();
    grid::write_measure_csv(&mu, &mut buf)?;
    write_bytes(&ctx.out, "mu.csv", &buf)?;

    let report = Json::Obj(vec![
        ("settings".into(), settings_json(ctx)),
        ("rho".into(), Json::Num(triple.rho)),
        ("markov_defect".into(), Json::Num(markov_defect)),
        ("spectral".into(), triple_json(&triple)),
    ]);
    write_json(&ctx.out, "normalize.json", &report)?;

    println!(
        "normalized {} branches at rho = {}; row-sum defect = {}",
        d,
        fmt_sig(triple.rho),
        fmt_sig(markov_defect)
    );
    Ok(exit_code(triple.converged()))
}

// --- pressure ---------------------------------------------------------------

pub fn pressure(ctx: &Ctx) -> Result<i32> {
    let phi = ctx.potential()?;
    let sys = ctx.build_system()?;
    let spectral = pressure_spectral(&sys, ctx.grid_n, ctx.tol, ctx.max_iter)?;

    let candidates = ctx.build_candidates(&sys)?;
    let measures: Vec<HolonomicMeasure> =
        candidates.iter().map(|c| c.measure.clone()).collect();
    let variational =
        pressure_variational(&phi, &measures, EntropyMethod::Inf, &ctx.descent_opts())?;

    let mut rows = Vec::new();
    for (c, score) in candidates.iter().zip(&variational.candidates) {
        rows.push(Json::Obj(vec![
            ("candidate".into(), c.spec_json.clone()),
            ("entropy".into(), Json::Num(score.entropy)),
            ("integral_ln_phi".into(), Json::Num(score.integral_ln_phi)),
            ("total".into(), Json::Num(score.total)),
            ("converged".into(), Json::Bool(score.converged)),
        ]));
    }
    let gap = (spectral.value - variational.value).abs();
    let all_converged = spectral.converged
        && variational.converged
        && candidates.iter().all(|c| c.converged);

    let report = Json::Obj(vec![
        ("settings".into(), settings_json(ctx)),
        (
            "spectral".into(),
            Json::Obj(vec![
                ("value".into(), Json::Num(spectral.value)),
                (
                    "rho".into(),
                    spectral.rho.map_or(Json::Null, Json::Num),
                ),
                ("converged".into(), Json::Bool(spectral.converged)),
                (
                    "warnings".into(),
                    Json::Arr(spectral.warnings.iter().map(Json::str).collect()),
                ),
            ]),
        ),
        (
            "variational".into(),
            Json::Obj(vec![
                ("value".into(), Json::Num(variational.value)),
                (
                    "argmax".into(),
                    variational
                        .argmax
                        .map_or(Json::Null, |k| Json::Int(k as i64)),
                ),
                ("candidates".into(), Json::Arr(rows)),
                ("converged".into(), Json::Bool(variational.converged)),
            ]),
        ),
        ("gap".into(), Json::Num(gap)),
        ("converged".into(), Json::Bool(all_converged)),
    ]);
    write_json(&ctx.out, "pressure.json", &report)?;

    println!(
        "spectral pressure = {}; variational = {}; gap = {}",
        fmt_sig(spectral.value),
        fmt_sig(variational.value),
        fmt_sig(gap)
    );
    Ok(exit_code(all_converged))
}

// --- entropy ----------------------------------------------------------------

pub fn entropy(ctx: &Ctx) -> Result<i32> {
    let sys = ctx.build_system()?;
    let psi = ctx.psi()?;
    let opts = ctx.descent_opts();
    let candidates = ctx.build_candidates(&sys)?;

    let mut rows = Vec::new();
    let mut all_converged = true;
    for c in &candidates {
        let inf = entropy_inf(&c.measure, &psi, &opts)?;
        let alt = entropy_alt(&c.measure)?;
        all_converged &= inf.converged && c.converged;
        println!(
            "{}: inf = {} (converged = {}), alt = {}",
            c.label,
            fmt_sig(inf.value),
            inf.converged,
            fmt_sig(alt.value)
        );
        rows.push(Json::Obj(vec![
            ("candidate".into(), c.spec_json.clone()),
            (
                "inf".into(),
                Json::Obj(vec![
                    ("value".into(), Json::Num(inf.value)),
                    ("iterations".into(), Json::Int(inf.iterations as i64)),
                    ("gradient_norm".into(), Json::Num(inf.gradient_norm)),
                    ("converged".into(), Json::Bool(inf.converged)),
                    ("psi".into(), Json::str(&inf.psi_used)),
                ]),
            ),
            (
                "alt".into(),
                Json::Obj(vec![("value".into(), Json::Num(alt.value))]),
            ),
        ]));
    }

    let report = Json::Obj(vec![
        ("settings".into(), settings_json(ctx)),
        ("psi".into(), Json::str(psi.label())),
        ("candidates".into(), Json::Arr(rows)),
        ("converged".into(), Json::Bool(all_converged)),
    ]);
    write_json(&ctx.out, "entropy.json", &report)?;
    Ok(exit_code(all_converged))
}

// --- verify -----------------------------------------------------------------

struct Check {
    name: String,
    value: f64,
    tol: f64,
    pass: bool,
}

impl Check {
    fn upper(name: impl Into<String>, value: f64, tol: f64) -> Check {
        Check {
            name: name.into(),
            value,
            tol,
            pass: value <= tol,
        }
    }

    fn lower(name: impl Into<String>, value: f64, tol: f64) -> Check {
        Check {
            name: name.into(),
            value,
            tol,
            pass: value >= -tol,
        }
    }

    fn print(&self) {
        println!(
            "{} {} = {} (tol {:e})",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            fmt_sig(self.value),
            self.tol
        );
    }

    fn json(&self) -> Json {
        Json::Obj(vec![
            ("name".into(), Json::str(&self.name)),
            ("value".into(), Json::Num(self.value)),
            ("tol".into(), Json::Num(self.tol)),
            ("pass".into(), Json::Bool(self.pass)),
        ])
    }
}

pub fn verify(ctx: &Ctx) -> Result<i32> {
    let sys = ctx.build_system()?;
    let n = ctx.grid_n;
    let battery = default_test_battery::<f64>(n);
    let inequality_test = GridFunction::from_fn(n, |x| 1.0 + x * x)?;
    let candidates = ctx.build_candidates(&sys)?;

    let system_markov = check_markov(&sys, n)?;
    println!(
        "INFO system row-sum defect = {} (stochastic if <= {:e})",
        fmt_sig(system_markov),
        MARKOV_TOL
    );

    let mut rows = Vec::new();
    let mut all_converged = true;
    for (k, c) in candidates.iter().enumerate() {
        all_converged &= c.converged;
        let mut checks = vec![Check::upper(
            format!("holonomy[{k} {}]", c.label),
            holonomy_defect(&c.measure, &battery)?,
            VERIFY_TOL,
        )];
        checks.push(Check::lower(
            format!("transfer_inequality[{k} {}]", c.label),
            holonomic_inequality_defect(&c.measure, &inequality_test)?,
            1e-10,
        ));
        match &c.measure {
            HolonomicMeasure::Lifted(lm) => {
                checks.push(Check::upper(
                    format!("markov_defect[{k} {}]", c.label),
                    lm.markov_defect(),
                    MARKOV_TOL,
                ));
                checks.push(Check::upper(
                    format!("stationarity[{k} {}]", c.label),
                    lm.invariance_defect(),
                    MARKOV_TOL,
                ));
            }
            HolonomicMeasure::Orbit(om) => {
                checks.push(Check::upper(
                    format!("orbit_closure[{k} {}]", c.label),
                    om.return_defect(),
                    1e-9,
                ));
            }
        }
        for check in &checks {
            check.print();
        }

        // Informational: shift-invariance on a depth-2 cylinder. Not an
        // invariant of every holonomic measure, so no PASS/FAIL.
        let cylinder: Vec<u8> = match &c.word {
            Some(w) => vec![w.digit(0), w.digit(1)],
            None => vec![0, 0],
        };
        let ones = GridFunction::constant(n, 1.0)?;
        let sigma = sigma_invariance_defect(&c.measure, &ones, &cylinder)?;
        println!(
            "INFO shift_defect[{k} {}] on cylinder {:?} = {}",
            c.label,
            cylinder,
            fmt_sig(sigma)
        );

        rows.push(Json::Obj(vec![
            ("candidate".into(), c.spec_json.clone()),
            (
                "checks".into(),
                Json::Arr(checks.iter().map(Check::json).collect()),
            ),
            (
                "shift_defect".into(),
                Json::Obj(vec![
                    ("cylinder".into(), digits_json(&cylinder)),
                    ("value".into(), Json::Num(sigma)),
                ]),
            ),
            ("converged".into(), Json::Bool(c.converged)),
        ]));
    }

    let report = Json::Obj(vec![
        ("settings".into(), settings_json(ctx)),
        ("system_markov_defect".into(), Json::Num(system_markov)),
        ("candidates".into(), Json::Arr(rows)),
        ("converged".into(), Json::Bool(all_converged)),
    ]);
    write_json(&ctx.out, "verify.json", &report)?;
    Ok(exit_code(all_converged))
}

// --- simulate ---------------------------------------------------------------

pub fn simulate(ctx: &Ctx) -> Result<i32> {
    let configured = ctx.build_system()?;
    let n = ctx.grid_n;
    let markov_defect = check_markov(&configured, n)?;

    // The chaos game needs stochastic weights; normalize on the fly when the
    // configured ones are not.
    let mut all_converged = true;
    let (sys, normalized) = if markov_defect <= MARKOV_TOL {
        (configured, false)
    } else {
        let triple = spectral_triple(&configured, n, ctx.tol, ctx.max_iter)?;
        all_converged &= triple.converged();
        let (normalized_sys, _mu) = normalize_system(&configured, &triple)?;
        println!(
            "note: weights are not stochastic (row-sum defect {}); simulating the normalized system",
            fmt_sig(markov_defect)
        );
        (normalized_sys, true)
    };

    let steps = ctx.cfg.steps.unwrap_or(100_000);
    let burn_in = ctx.cfg.burn_in.unwrap_or_else(|| default_burn_in(steps));
    let bins = ctx.cfg.bins.unwrap_or(256);
    let x0 = ctx.cfg.x0.unwrap_or(0.5);

    let traj = chaos_game(&sys, x0, steps, ctx.seed)?;

    // Stationary reference from the dual fixed point of the same system.
    let triple = spectral_triple(&sys, n, ctx.tol, ctx.max_iter)?;
    all_converged &= triple.converged();

    type Observable = (&'static str, fn(f64) -> f64);
    let observables: [Observable; 3] = [
        ("x", |x| x),
        ("x^2", |x| x * x),
        ("cos_2pi_x", |x| (2.0 * PI * x).cos()),
    ];
    let mut birkhoff_rows = Vec::new();
    for (name, f) in observables {
        let simulated = birkhoff_average(&traj, |x| Ok(f(x)), burn_in)?;
        let reference = triple.nu.integrate(&GridFunction::from_fn(n, f)?)?;
        println!(
            "birkhoff {name}: simulated = {}, stationary = {}, error = {}",
            fmt_sig(simulated),
            fmt_sig(reference),
            fmt_sig((simulated - reference).abs())
        );
        birkhoff_rows.push(Json::Obj(vec![
            ("observable".into(), Json::str(name)),
            ("simulated".into(), Json::Num(simulated)),
            ("stationary".into(), Json::Num(reference)),
            ("abs_error".into(), Json::Num((simulated - reference).abs())),
        ]));
    }

    let hist = empirical_measure(&traj, bins, burn_in)?;
    let reference_hist = if bins == n {
        triple.nu.clone()
    } else {
        let t = spectral_triple(&sys, bins, ctx.tol, ctx.max_iter)?;
        all_converged &= t.converged();
        t.nu
    };
    let empirical_l1 = l1_distance(&hist, &reference_hist)?;
    println!("empirical measure L1 distance = {}", fmt_sig(empirical_l1));

    let mut buf = Vec::new();
    grid::write_measure_csv(&hist, &mut buf)?;
    write_bytes(&ctx.out, "empirical.csv", &buf)?;

    let stride = steps.div_ceil(MAX_TRAJECTORY_ROWS).max(1);
    let mut csv = String::from("step,x,symbol\n");
    let mut rows_written = 0usize;
    for k in (0..traj.symbols.len()).step_by(stride) {
        csv.push_str(&format!(
            "{k},{},{}\n",
            fmt_sig(traj.states[k]),
            traj.symbols[k]
        ));
        rows_written += 1;
    }
    write_text(&ctx.out, "trajectory.csv", &csv)?;

    let report = Json::Obj(vec![
        ("settings".into(), settings_json(ctx)),
        ("seed".into(), Json::Int(ctx.seed as i64)),
        ("x0".into(), Json::Num(x0)),
        ("steps".into(), Json::Int(steps as i64)),
        ("burn_in".into(), Json::Int(burn_in as i64)),
        ("bins".into(), Json::Int(bins as i64)),
        ("normalized".into(), Json::Bool(normalized)),
        ("markov_defect".into(), Json::Num(markov_defect)),
        (
            "warnings".into(),
            Json::Arr(traj.warnings.iter().map(Json::str).collect()),
        ),
        ("birkhoff".into(), Json::Arr(birkhoff_rows)),
        ("empirical_l1".into(), Json::Num(empirical_l1)),
        ("trajectory_rows".into(), Json::Int(rows_written as i64)),
    ]);
    write_json(&ctx.out, "simulate.json", &report)?;
    Ok(exit_code(all_converged))
}

// --- holonomy ---------------------------------------------------------------

pub fn holonomy(ctx: &Ctx) -> Result<i32> {
    let sys = ctx.build_system()?;
    let n = ctx.grid_n;
    let battery = default_test_battery::<f64>(n);
    let monomials = monomial_tests::<f64>(n);
    let inequality_test = GridFunction::from_fn(n, |x| 1.0 + x * x)?;
    let ones = GridFunction::constant(n, 1.0)?;
    let candidates = ctx.build_candidates(&sys)?;

    let mut rows = Vec::new();
    let mut all_converged = true;
    for c in &candidates {
        all_converged &= c.converged;
        let holonomy = holonomy_defect(&c.measure, &battery)?;
        let marginal = marginal_invariance_defect(&c.measure, &monomials)?;
        let inequality = holonomic_inequality_defect(&c.measure, &inequality_test)?;
        let cylinder: Vec<u8> = match &c.word {
            Some(w) => vec![w.digit(0), w.digit(1)],
            None => vec![0, 0],
        };
        let sigma = sigma_invariance_defect(&c.measure, &ones, &cylinder)?;
        println!(
            "{}: holonomy = {}, marginal = {}, inequality = {}, shift{:?} = {}",
            c.label,
            fmt_sig(holonomy),
            fmt_sig(marginal),
            fmt_sig(inequality),
            cylinder,
            fmt_sig(sigma)
        );
        rows.push(Json::Obj(vec![
            ("candidate".into(), c.spec_json.clone()),
            ("holonomy_defect".into(), Json::Num(holonomy)),
            ("marginal_invariance_defect".into(), Json::Num(marginal)),
            ("inequality_defect".into(), Json::Num(inequality)),
            (
                "shift_defect".into(),
                Json::Obj(vec![
                    ("cylinder".into(), digits_json(&cylinder)),
                    ("value".into(), Json::Num(sigma)),
                ]),
            ),
        ]));
    }

    let report = Json::Obj(vec![
        ("settings".into(), settings_json(ctx)),
        ("candidates".into(), Json::Arr(rows)),
        ("converged".into(), Json::Bool(all_converged)),
    ]);
    write_json(&ctx.out, "holonomy.json", &report)?;
    Ok(exit_code(all_converged))
}

// --- beta sweep ---------------------------------------------------------------

pub fn sweep(ctx: &Ctx) -> Result<i32> {
    let phi = ctx.potential()?;
    let maps = ctx.parse_maps()?;
    let betas: Vec<f64> = match ctx.beta {
        Some(b) => vec![b],
        None => ctx
            .cfg
            .betas
            .clone()
            .unwrap_or_else(|| vec![1.0, 2.0, 4.0, 8.0, 16.0]),
    };

    let rows = beta_sweep(&maps, &phi, &betas, ctx.grid_n, ctx.tol, ctx.max_iter)?;

    let mut csv =
        String::from("beta,rho,pressure,integral_ln_phi,residual_h,residual_nu,converged\n");
    let mut json_rows = Vec::new();
    let mut all_converged = true;
    for row in &rows {
        all_converged &= row.converged;
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt_sig(row.beta),
            fmt_sig(row.rho),
            fmt_sig(row.pressure),
            fmt_sig(row.integral_ln_phi),
            fmt_sig(row.residual_h),
            fmt_sig(row.residual_nu),
            row.converged
        ));
        println!(
            "beta = {}: pressure = {}, integral_ln_phi = {}, converged = {}",
            fmt_sig(row.beta),
            fmt_sig(row.pressure),
            fmt_sig(row.integral_ln_phi),
            row.converged
        );
        json_rows.push(Json::Obj(vec![
            ("beta".into(), Json::Num(row.beta)),
            ("rho".into(), Json::Num(row.rho)),
            ("pressure".into(), Json::Num(row.pressure)),
            ("integral_ln_phi".into(), Json::Num(row.integral_ln_phi)),
            ("residual_h".into(), Json::Num(row.residual_h)),
            ("residual_nu".into(), Json::Num(row.residual_nu)),
            ("converged".into(), Json::Bool(row.converged)),
            ("warnings".into(), warnings_json(&row.warnings)),
        ]));
    }
    write_text(&ctx.out, "beta_sweep.csv", &csv)?;

    let report = Json::Obj(vec![
        ("settings".into(), settings_json(ctx)),
        ("rows".into(), Json::Arr(json_rows)),
        ("converged".into(), Json::Bool(all_converged)),
    ]);
    write_json(&ctx.out, "beta_sweep.json", &report)?;
    Ok(exit_code(all_converged))
}
