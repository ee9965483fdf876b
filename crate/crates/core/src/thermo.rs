//! Entropy, pressure, and equilibrium diagnostics.
//!
//! The entropy of a holonomic measure is computed by minimizing the convex
//! functional `J(g) = int [ln(P_psi e^g)(x) - ln psi(x) - g(x)] dnu(x)`
//! over `g`, where `nu` is the x marginal. The infimum is independent of
//! the positive reference function `psi` (substituting
//! `g -> g + ln(psi1/psi2)` maps the problems onto each other), which
//! `psi_independence_check` verifies numerically. Orbit measures reduce to
//! a finite problem on the depth-1 closure of their support; lifted
//! measures optimize over all grid nodes.

use crate::error::{Error, Result};
use crate::expr::ExprAst;
use crate::grid::{node_x, GridFunction};
use crate::holonomic::{disintegrate, lift, monomial_tests, HolonomicMeasure, LiftedMeasure};
use crate::operator::{
    normalize_system, spectral_triple, SpectralTriple, TransferMatrix, WeightedSystem, Weights,
};
use crate::scalar::{sup_norm, Real};

/// Reference function for the entropy objective: an expression (evaluated
/// exactly) or a tabulated grid function (interpolated).
#[derive(Debug, Clone)]
pub enum Psi<F> {
    Expr(ExprAst),
    Grid(GridFunction<F>),
}

impl<F: Real> Psi<F> {
    /// The constant reference `psi = 1`, for which the starting point
    /// `g = 0` already evaluates to `ln d` on Markov-invariant marginals.
    pub fn one() -> Self {
        Psi::Expr(ExprAst::Const(1.0))
    }

    pub fn eval(&self, x: F) -> Result<F> {
        match self {
            Psi::Expr(e) => e.evaluate(x),
            Psi::Grid(g) => g.interp_eval(x),
        }
    }

    fn eval_positive(&self, x: F) -> Result<F> {
        let v = self.eval(x)?;
        if v <= F::zero() {
            return Err(Error::NotPositive(format!(
                "entropy reference function is not positive at x = {}",
                x.to_f64().unwrap_or(f64::NAN)
            )));
        }
        Ok(v)
    }

    pub fn label(&self) -> String {
        match self {
            Psi::Expr(e) => format!("{e}"),
            Psi::Grid(g) => format!("tabulated[n={}]", g.n()),
        }
    }
}

/// Stopping parameters for the descent.
#[derive(Debug, Clone, Copy)]
pub struct DescentOptions<F> {
    /// Sup-norm gradient threshold.
    pub tol: F,
    /// Cap on accepted descent steps.
    pub max_iter: usize,
}

impl<F: Real> Default for DescentOptions<F> {
    fn default() -> Self {
        Self {
            tol: F::of(1e-8),
            max_iter: 5000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntropyMethod {
    Inf,
    Alt,
}

impl std::fmt::Display for EntropyMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EntropyMethod::Inf => write!(f, "inf_formula"),
            EntropyMethod::Alt => write!(f, "alt_formula"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EntropyReport<F> {
    /// Entropy in nats.
    pub value: F,
    pub method: EntropyMethod,
    pub iterations: usize,
    pub gradient_norm: F,
    pub converged: bool,
    /// Label of the reference function used (inf method only).
    pub psi_used: String,
}

trait Objective<F: Real> {
    fn dim(&self) -> usize;
    fn value(&self, g: &[F]) -> F;
    fn value_and_grad(&self, g: &[F], grad: &mut [F]) -> F;
}

struct DescentResult<F> {
    value: F,
    gradient_norm: F,
    iterations: usize,
    converged: bool,
}

/// Gradient descent with Armijo backtracking (c = 1e-4, shrink 1/2) and a
/// step that doubles after every accepted iterate, so the search recovers
/// quickly from conservative steps on large grids. The objective is
/// invariant under adding a constant to `g`; iterates are recentered to
/// mean zero to keep the exponentials bounded.
fn minimize<F: Real>(
    obj: &dyn Objective<F>,
    mut g: Vec<F>,
    opts: &DescentOptions<F>,
) -> DescentResult<F> {
    let dim = obj.dim();
    debug_assert_eq!(g.len(), dim);
    recenter(&mut g);
    let mut grad = vec![F::zero(); dim];
    let mut value = obj.value_and_grad(&g, &mut grad);
    let c = F::of(1e-4);
    let mut step = F::one();
    let mut iterations = 0;
    let mut converged = sup_norm(&grad) <= opts.tol;

    while !converged && iterations < opts.max_iter {
        let grad_sq = grad.iter().fold(F::zero(), |a, &d| a + d * d);
        let mut trial = vec![F::zero(); dim];
        let mut accepted = false;
        while step > F::of(1e-18) {
            for k in 0..dim {
                trial[k] = g[k] - step * grad[k];
            }
            recenter(&mut trial);
            let trial_value = obj.value(&trial);
            if trial_value <= value - c * step * grad_sq {
                accepted = true;
                break;
            }
            step = step / F::of(2.0);
        }
        if !accepted {
            break;
        }
        g.copy_from_slice(&trial);
        value = obj.value_and_grad(&g, &mut grad);
        iterations += 1;
        step = (step * F::of(2.0)).min(F::of(1e6));
        converged = sup_norm(&grad) <= opts.tol;
    }

    DescentResult {
        gradient_norm: sup_norm(&grad),
        value,
        iterations,
        converged,
    }
}

fn recenter<F: Real>(g: &mut [F]) {
    let mean = g.iter().fold(F::zero(), |a, &v| a + v) / F::of(g.len() as f64);
    for v in g.iter_mut() {
        *v = *v - mean;
    }
}

/// Finite entropy problem on the depth-1 closure of an atomic marginal:
/// the objective reads `g` only at support points and their branch images,
/// so optimizing that finite vector solves the full infimum exactly.
struct FiniteProblem<F> {
    /// Closure points: support first, then any extra image points.
    points: Vec<F>,
    /// Marginal masses, aligned with the leading support points.
    masses: Vec<F>,
    /// `images[p][i]` = (closure index of `tau_i(points[p])`, psi there).
    images: Vec<Vec<(usize, F)>>,
    /// `ln psi` at the support points.
    psi_ln: Vec<F>,
}

impl<F: Real> FiniteProblem<F> {
    fn build(m: &HolonomicMeasure<F>, psi: &Psi<F>) -> Result<Self> {
        let dis = disintegrate(m)?;
        let sys = m.system();
        let mut points = dis.support.clone();
        let mut images = Vec::with_capacity(points.len());
        for p in 0..dis.support.len() {
            let mut row = Vec::with_capacity(sys.branch_count());
            for i in 0..sys.branch_count() {
                let y = sys.apply_map(i, dis.support[p])?;
                let idx = match points
                    .iter()
                    .position(|&q| (q - y).abs() <= F::eps_atom())
                {
                    Some(idx) => idx,
                    None => {
                        points.push(y);
                        points.len() - 1
                    }
                };
                row.push((idx, psi.eval_positive(y)?));
            }
            images.push(row);
        }
        let mut psi_ln = Vec::with_capacity(dis.support.len());
        for &x in &dis.support {
            psi_ln.push(psi.eval_positive(x)?.ln());
        }
        Ok(Self {
            points,
            masses: dis.masses,
            images,
            psi_ln,
        })
    }

    fn start(&self, psi: &Psi<F>) -> Result<Vec<F>> {
        self.points
            .iter()
            .map(|&x| Ok(-psi.eval_positive(x)?.ln()))
            .collect()
    }

    fn accumulate(&self, g: &[F], mut grad: Option<&mut [F]>) -> F {
        let mut value = F::zero();
        for (p, row) in self.images.iter().enumerate() {
            let mut r = F::zero();
            for &(idx, psi) in row {
                r = r + psi * g[idx].exp();
            }
            value = value + self.masses[p] * (r.ln() - self.psi_ln[p] - g[p]);
            if let Some(grad) = grad.as_deref_mut() {
                for &(idx, psi) in row {
                    grad[idx] = grad[idx] + self.masses[p] * psi * g[idx].exp() / r;
                }
                grad[p] = grad[p] - self.masses[p];
            }
        }
        value
    }
}

impl<F: Real> Objective<F> for FiniteProblem<F> {
    fn dim(&self) -> usize {
        self.points.len()
    }

    fn value(&self, g: &[F]) -> F {
        self.accumulate(g, None)
    }

    fn value_and_grad(&self, g: &[F], grad: &mut [F]) -> F {
        grad.fill(F::zero());
        self.accumulate(g, Some(grad))
    }
}

/// Grid entropy problem for lifted measures: `g` lives on the nodes and
/// the reference-weighted transfer matrix supplies `P_psi e^g`.
struct GridProblem<F> {
    matrix: TransferMatrix<F>,
    nu: Vec<F>,
    psi_ln: Vec<F>,
}

impl<F: Real> GridProblem<F> {
    fn build(m: &LiftedMeasure<F>, psi: &Psi<F>) -> Result<Self> {
        let n = m.base().n();
        if let Psi::Grid(g) = psi {
            if g.n() != n {
                return Err(Error::GridMismatch {
                    left: g.n(),
                    right: n,
                });
            }
        }
        let sys = m.system();
        let mut tabulated = Vec::with_capacity(sys.branch_count());
        for i in 0..sys.branch_count() {
            let mut w = Vec::with_capacity(n + 1);
            for j in 0..=n {
                w.push(psi.eval_positive(sys.apply_map(i, node_x(j, n))?)?);
            }
            tabulated.push(GridFunction::new(n, w)?);
        }
        let psi_sys =
            WeightedSystem::new(sys.maps().to_vec(), Weights::PerMapGrid(tabulated), n)?;
        let matrix = TransferMatrix::assemble(&psi_sys, n)?;
        let mut psi_ln = Vec::with_capacity(n + 1);
        for j in 0..=n {
            psi_ln.push(psi.eval_positive(node_x(j, n))?.ln());
        }
        Ok(Self {
            matrix,
            nu: m.base().weights().to_vec(),
            psi_ln,
        })
    }

    fn start(&self) -> Vec<F> {
        self.psi_ln.iter().map(|&v| -v).collect()
    }
}

impl<F: Real> Objective<F> for GridProblem<F> {
    fn dim(&self) -> usize {
        self.nu.len()
    }

    fn value(&self, g: &[F]) -> F {
        let e: Vec<F> = g.iter().map(|&v| v.exp()).collect();
        let r = self.matrix.apply(&e);
        let mut value = F::zero();
        for j in 0..self.nu.len() {
            if self.nu[j] > F::zero() {
                value = value + self.nu[j] * (r[j].ln() - self.psi_ln[j] - g[j]);
            }
        }
        value
    }

    fn value_and_grad(&self, g: &[F], grad: &mut [F]) -> F {
        let e: Vec<F> = g.iter().map(|&v| v.exp()).collect();
        let r = self.matrix.apply(&e);
        let mut value = F::zero();
        let mut q = vec![F::zero(); self.nu.len()];
        for j in 0..self.nu.len() {
            if self.nu[j] > F::zero() {
                value = value + self.nu[j] * (r[j].ln() - self.psi_ln[j] - g[j]);
                q[j] = self.nu[j] / r[j];
            }
        }
        let pulled = self.matrix.apply_dual(&q);
        for k in 0..self.nu.len() {
            grad[k] = e[k] * pulled[k] - self.nu[k];
        }
        value
    }
}

/// Entropy by the infimum formula. Non-convergence of the descent is
/// reported through the `converged` flag, not as an error.
pub fn entropy_inf<F: Real>(
    m: &HolonomicMeasure<F>,
    psi: &Psi<F>,
    opts: &DescentOptions<F>,
) -> Result<EntropyReport<F>> {
    let result = match m {
        HolonomicMeasure::Orbit(_) => {
            let problem = FiniteProblem::build(m, psi)?;
            let g0 = problem.start(psi)?;
            minimize(&problem, g0, opts)
        }
        HolonomicMeasure::Lifted(lm) => {
            let problem = GridProblem::build(lm, psi)?;
            let g0 = problem.start();
            minimize(&problem, g0, opts)
        }
    };
    Ok(EntropyReport {
        value: result.value,
        method: EntropyMethod::Inf,
        iterations: result.iterations,
        gradient_norm: result.gradient_norm,
        converged: result.converged,
        psi_used: psi.label(),
    })
}

/// Entropy by the disintegration formula:
/// `-int sum_i u_i ln u_i dnu` with the convention `0 ln 0 = 0`.
pub fn entropy_alt<F: Real>(m: &HolonomicMeasure<F>) -> Result<EntropyReport<F>> {
    let dis = disintegrate(m)?;
    let mut value = F::zero();
    for (k, &mass) in dis.masses.iter().enumerate() {
        let mut fiber = F::zero();
        for row in &dis.branch {
            let u = row[k];
            if u > F::zero() {
                fiber = fiber - u * u.ln();
            }
        }
        value = value + mass * fiber;
    }
    Ok(EntropyReport {
        value,
        method: EntropyMethod::Alt,
        iterations: 0,
        gradient_norm: F::zero(),
        converged: true,
        psi_used: String::new(),
    })
}

pub fn entropy<F: Real>(
    m: &HolonomicMeasure<F>,
    method: EntropyMethod,
    opts: &DescentOptions<F>,
) -> Result<EntropyReport<F>> {
    match method {
        EntropyMethod::Inf => entropy_inf(m, &Psi::one(), opts),
        EntropyMethod::Alt => entropy_alt(m),
    }
}

/// `|h_{psi1} - h_{psi2}|` for the infimum entropy.
pub fn psi_independence_check<F: Real>(
    m: &HolonomicMeasure<F>,
    psi1: &Psi<F>,
    psi2: &Psi<F>,
    opts: &DescentOptions<F>,
) -> Result<F> {
    let h1 = entropy_inf(m, psi1, opts)?;
    let h2 = entropy_inf(m, psi2, opts)?;
    Ok((h1.value - h2.value).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PressureMethod {
    Spectral,
    Variational,
}

impl std::fmt::Display for PressureMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PressureMethod::Spectral => write!(f, "spectral"),
            PressureMethod::Variational => write!(f, "variational"),
        }
    }
}

/// Per-candidate detail of a variational pressure computation.
#[derive(Debug, Clone)]
pub struct CandidateScore<F> {
    pub entropy: F,
    pub integral_ln_phi: F,
    pub total: F,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct PressureReport<F> {
    pub value: F,
    pub method: PressureMethod,
    /// Spectral radius (spectral method).
    pub rho: Option<F>,
    /// Index of the best candidate (variational method).
    pub argmax: Option<usize>,
    pub candidates: Vec<CandidateScore<F>>,
    pub converged: bool,
    pub warnings: Vec<String>,
}

/// `p = ln rho` of a weight-function (potential) system.
pub fn pressure_spectral<F: Real>(
    sys: &WeightedSystem<F>,
    n: usize,
    tol: F,
    max_iter: usize,
) -> Result<PressureReport<F>> {
    let phi = sys.potential().ok_or_else(|| {
        Error::InvalidInput("spectral pressure requires a weight-function system".into())
    })?;
    for j in 0..=n {
        let v = phi.evaluate(node_x::<F>(j, n))?;
        if v <= F::zero() {
            return Err(Error::NotPositive(format!(
                "potential is not positive at node {j}; its logarithm is undefined"
            )));
        }
    }
    let triple = spectral_triple(sys, n, tol, max_iter)?;
    Ok(PressureReport {
        value: triple.rho.ln(),
        method: PressureMethod::Spectral,
        rho: Some(triple.rho),
        argmax: None,
        candidates: Vec::new(),
        converged: triple.converged(),
        warnings: triple.warnings.iter().map(|w| w.to_string()).collect(),
    })
}

/// Evaluates `ln phi` with a positivity check.
pub fn ln_phi<F: Real>(phi: &ExprAst, x: F) -> Result<F> {
    let v = phi.evaluate(x)?;
    if v <= F::zero() {
        return Err(Error::NotPositive(format!(
            "potential is not positive at x = {}",
            x.to_f64().unwrap_or(f64::NAN)
        )));
    }
    Ok(v.ln())
}

/// Candidate-set variational pressure:
/// `max over candidates of h + int ln phi d(marginal)`.
pub fn pressure_variational<F: Real>(
    phi: &ExprAst,
    candidates: &[HolonomicMeasure<F>],
    method: EntropyMethod,
    opts: &DescentOptions<F>,
) -> Result<PressureReport<F>> {
    if candidates.is_empty() {
        return Err(Error::InvalidInput(
            "variational pressure needs at least one candidate measure".into(),
        ));
    }
    let mut scores = Vec::with_capacity(candidates.len());
    let mut best = 0usize;
    let mut all_converged = true;
    for (idx, m) in candidates.iter().enumerate() {
        let h = entropy(m, method, opts)?;
        let integral = m.marginal_integrate_with(|x| ln_phi(phi, x))?;
        let total = h.value + integral;
        all_converged &= h.converged;
        scores.push(CandidateScore {
            entropy: h.value,
            integral_ln_phi: integral,
            total,
            converged: h.converged,
        });
        if total > scores[best].total {
            best = idx;
        }
    }
    Ok(PressureReport {
        value: scores[best].total,
        method: PressureMethod::Variational,
        rho: None,
        argmax: Some(best),
        candidates: scores,
        converged: all_converged,
        warnings: Vec::new(),
    })
}

/// Spectral data, normalized system, and lifted equilibrium measure of a
/// potential system: the dual fixed point of the normalized matrix lifted
/// through its own weights.
pub struct Equilibrium<F> {
    pub triple: SpectralTriple<F>,
    pub normalized: WeightedSystem<F>,
    pub measure: LiftedMeasure<F>,
}

pub fn lifted_equilibrium<F: Real>(
    sys: &WeightedSystem<F>,
    n: usize,
    tol: F,
    max_iter: usize,
) -> Result<Equilibrium<F>> {
    let triple = spectral_triple(sys, n, tol, max_iter)?;
    let (normalized, _mu) = normalize_system(sys, &triple)?;
    let measure = lift(&normalized, n, tol, max_iter)?;
    Ok(Equilibrium {
        triple,
        normalized,
        measure,
    })
}

#[derive(Debug, Clone)]
pub struct EquilibriumReport<F> {
    /// `|h + int ln phi - pressure|`.
    pub defect: F,
    pub entropy: F,
    pub integral_ln_phi: F,
    pub pressure: F,
    /// Sup over support and branches of `|u_i(y) - v_i(y)|`, comparing the
    /// candidate's disintegration against the normalized weights.
    pub u_minus_v_sup: F,
    /// Pushforward defect of the marginal under the normalized weights on
    /// the monomial battery.
    pub marginal_defect: F,
    pub is_equilibrium: bool,
}

/// Checks whether `m` attains the pressure for the potential behind
/// `normalized`, and runs the converse diagnostics: disintegrated weights
/// against the normalized ones, and invariance of the marginal under them.
pub fn equilibrium_check<F: Real>(
    m: &HolonomicMeasure<F>,
    phi: &ExprAst,
    pressure: F,
    normalized: &WeightedSystem<F>,
    method: EntropyMethod,
    tol: F,
    opts: &DescentOptions<F>,
) -> Result<EquilibriumReport<F>> {
    let h = entropy(m, method, opts)?;
    let integral = m.marginal_integrate_with(|x| ln_phi(phi, x))?;
    let defect = (h.value + integral - pressure).abs();

    let dis = disintegrate(m)?;
    let mut u_minus_v_sup = F::zero();
    for (k, &y) in dis.support.iter().enumerate() {
        for (i, row) in dis.branch.iter().enumerate() {
            let gap = (row[k] - normalized.weight(i, y)?).abs();
            u_minus_v_sup = u_minus_v_sup.max(gap);
        }
    }

    let battery = monomial_tests(normalized.natural_grid().unwrap_or(64));
    let mut marginal_defect = F::zero();
    for f in &battery {
        let mut acc = F::zero();
        for (k, &y) in dis.support.iter().enumerate() {
            let mut image = F::zero();
            for i in 0..normalized.branch_count() {
                image =
                    image + normalized.weight(i, y)? * f.interp_eval(normalized.apply_map(i, y)?)?;
            }
            acc = acc + dis.masses[k] * (image - f.interp_eval(y)?);
        }
        marginal_defect = marginal_defect.max(acc.abs());
    }

    Ok(EquilibriumReport {
        defect,
        entropy: h.value,
        integral_ln_phi: integral,
        pressure,
        u_minus_v_sup,
        marginal_defect,
        is_equilibrium: defect <= tol,
    })
}

/// One row of a temperature sweep.
#[derive(Debug, Clone)]
pub struct BetaRow<F> {
    pub beta: F,
    pub rho: F,
    pub pressure: F,
    /// `int ln phi` against the lifted equilibrium base at this beta.
    pub integral_ln_phi: F,
    pub residual_h: F,
    pub residual_nu: F,
    pub converged: bool,
    pub warnings: Vec<String>,
}

/// Sweeps `phi^beta`: spectral pressure, normalization, and the integral of
/// `ln phi` against each lifted equilibrium. As the inverse temperature
/// grows the equilibrium concentrates where `phi` is largest, so the
/// integral column is nondecreasing up to discretization error.
pub fn beta_sweep<F: Real>(
    maps: &[ExprAst],
    phi: &ExprAst,
    betas: &[F],
    n: usize,
    tol: F,
    max_iter: usize,
) -> Result<Vec<BetaRow<F>>> {
    let mut rows = Vec::with_capacity(betas.len());
    for &beta in betas {
        let phi_beta = ExprAst::Pow(
            Box::new(phi.clone()),
            Box::new(ExprAst::Const(beta.to_f64().ok_or_else(|| {
                Error::InvalidInput("beta is not representable as f64".into())
            })?)),
        );
        let sys = WeightedSystem::new(maps.to_vec(), Weights::Potential(phi_beta), n)?;
        let eq = lifted_equilibrium(&sys, n, tol, max_iter)?;
        let base = eq.measure.base();
        let mut integral = F::zero();
        for (j, &w) in base.weights().iter().enumerate() {
            integral = integral + w * ln_phi(phi, node_x(j, n))?;
        }
        rows.push(BetaRow {
            beta,
            rho: eq.triple.rho,
            pressure: eq.triple.rho.ln(),
            integral_ln_phi: integral,
            residual_h: eq.triple.residual_h,
            residual_nu: eq.triple.residual_nu,
            converged: eq.triple.converged(),
            warnings: eq.triple.warnings.iter().map(|w| w.to_string()).collect(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::holonomic::{make_orbit_measure, Word};
    use crate::operator::Weights;

    fn example3(n: usize) -> WeightedSystem<f64> {
        WeightedSystem::new(
            vec![parse("x").unwrap(), parse("1 - x").unwrap()],
            Weights::Potential(parse("2 + cos(2*pi*x)").unwrap()),
            n,
        )
        .unwrap()
    }

    fn halves_markov(n: usize) -> WeightedSystem<f64> {
        WeightedSystem::new(
            vec![parse("x/2").unwrap(), parse("(x + 1)/2").unwrap()],
            Weights::PerMapExpr(vec![parse("0.5").unwrap(), parse("0.5").unwrap()]),
            n,
        )
        .unwrap()
    }

    fn nu0() -> HolonomicMeasure<f64> {
        let sys = example3(64);
        let w = Word::new(vec![1, 1], vec![0]).unwrap();
        make_orbit_measure(&sys, 0.0, &w, 2).unwrap().into()
    }

    #[test]
    fn reflection_orbit_entropy_is_ln_two_by_the_inf_formula() {
        let report = entropy_inf(&nu0(), &Psi::one(), &DescentOptions::default()).unwrap();
        assert!(report.converged);
        assert!(
            (report.value - 2.0f64.ln()).abs() <= 1e-9,
            "value = {}",
            report.value
        );
    }

    #[test]
    fn reflection_orbit_entropy_is_zero_by_the_alt_formula() {
        let report = entropy_alt(&nu0()).unwrap();
        assert_eq!(report.value, 0.0);
    }

    #[test]
    fn single_branch_measures_have_zero_entropy() {
        let sys = WeightedSystem::<f64>::new(
            vec![parse("x/2").unwrap()],
            Weights::PerMapExpr(vec![parse("1").unwrap()]),
            64,
        )
        .unwrap();
        let w = Word::periodic(vec![0]).unwrap();
        let m: HolonomicMeasure<f64> = make_orbit_measure(&sys, 0.0, &w, 1).unwrap().into();
        let inf = entropy_inf(&m, &Psi::one(), &DescentOptions::default()).unwrap();
        assert!(inf.value.abs() <= 1e-8, "inf entropy = {}", inf.value);
        let alt = entropy_alt(&m).unwrap();
        assert_eq!(alt.value, 0.0);
    }

    #[test]
    fn lifted_fair_coin_entropy_matches_ln_two() {
        let sys = halves_markov(256);
        let m: HolonomicMeasure<f64> = lift(&sys, 256, 1e-12, 10_000).unwrap().into();
        let inf = entropy_inf(&m, &Psi::one(), &DescentOptions::default()).unwrap();
        assert!(inf.converged);
        assert!(
            (inf.value - 2.0f64.ln()).abs() <= 1e-4,
            "inf entropy = {}",
            inf.value
        );
        let alt = entropy_alt(&m).unwrap();
        assert!((alt.value - 2.0f64.ln()).abs() <= 1e-12);
        // three symmetric branches carry ln 3
        let thirds = WeightedSystem::<f64>::new(
            vec![
                parse("x/3").unwrap(),
                parse("(x + 1)/3").unwrap(),
                parse("(x + 2)/3").unwrap(),
            ],
            Weights::PerMapExpr(vec![
                parse("1/3").unwrap(),
                parse("1/3").unwrap(),
                parse("1/3").unwrap(),
            ]),
            128,
        )
        .unwrap();
        let m3: HolonomicMeasure<f64> = lift(&thirds, 128, 1e-12, 10_000).unwrap().into();
        let alt3 = entropy_alt(&m3).unwrap();
        assert!((alt3.value - 3.0f64.ln()).abs() <= 1e-12);
    }

    #[test]
    fn entropy_is_psi_independent() {
        let m = nu0();
        let opts = DescentOptions::default();
        let five = Psi::Expr(parse("5").unwrap());
        assert!(psi_independence_check(&m, &Psi::one(), &five, &opts).unwrap() <= 1e-6);
        let wavy = Psi::Expr(parse("2 + cos(2*pi*x)").unwrap());
        assert!(psi_independence_check(&m, &Psi::one(), &wavy, &opts).unwrap() <= 1e-5);
        // grid-tabulated reference agrees with its expression form
        let tab = Psi::Grid(GridFunction::from_expr(64, &parse("2 + cos(2*pi*x)").unwrap()).unwrap());
        assert!(psi_independence_check(&m, &wavy, &tab, &opts).unwrap() <= 1e-5);
    }

    #[test]
    fn spectral_pressure_closed_forms() {
        // constant potential k with d maps: p = ln(d k)
        for (d, k) in [(2usize, 0.5f64), (2, 2.0), (3, 1.0)] {
            let maps: Vec<_> = (0..d)
                .map(|i| parse(&format!("(x + {i})/{d}")).unwrap())
                .collect();
            let sys = WeightedSystem::new(
                maps,
                Weights::Potential(parse(&format!("{k}")).unwrap()),
                128,
            )
            .unwrap();
            let report = pressure_spectral(&sys, 128, 1e-10, 10_000).unwrap();
            assert!(
                (report.value - (d as f64 * k).ln()).abs() <= 1e-10,
                "d = {d}, k = {k}"
            );
        }
        // Markov potential: p = 0
        let markov = WeightedSystem::<f64>::new(
            vec![parse("x/2").unwrap(), parse("(x + 1)/2").unwrap()],
            Weights::Potential(parse("0.5 + 0.2*sin(2*pi*x)").unwrap()),
            256,
        )
        .unwrap();
        let report = pressure_spectral(&markov, 256, 1e-11, 20_000).unwrap();
        assert!(report.value.abs() <= 1e-9, "pressure = {}", report.value);
        // reflection example: block structure gives rho = 6 quickly at n = 64
        let report = pressure_spectral(&example3(64), 64, 1e-10, 100_000).unwrap();
        assert!((report.value - 6.0f64.ln()).abs() <= 1e-10);
        // non-potential systems are rejected
        assert!(pressure_spectral(&halves_markov(64), 64, 1e-10, 100).is_err());
    }

    #[test]
    fn variational_pressure_picks_the_reflection_orbit() {
        let phi = parse("2 + cos(2*pi*x)").unwrap();
        let uniform = WeightedSystem::<f64>::new(
            vec![parse("x").unwrap(), parse("1 - x").unwrap()],
            Weights::PerMapExpr(vec![parse("0.5").unwrap(), parse("0.5").unwrap()]),
            256,
        )
        .unwrap();
        let lifted: HolonomicMeasure<f64> = lift(&uniform, 256, 1e-12, 10_000).unwrap().into();
        let candidates = vec![nu0(), lifted];
        let report = pressure_variational(
            &phi,
            &candidates,
            EntropyMethod::Inf,
            &DescentOptions::default(),
        )
        .unwrap();
        assert_eq!(report.argmax, Some(0));
        assert!(
            (report.value - 6.0f64.ln()).abs() <= 1e-6,
            "pressure = {}",
            report.value
        );
        // the orbit candidate's integral is exactly ln 3
        assert!((report.candidates[0].integral_ln_phi - 3.0f64.ln()).abs() <= 1e-14);
    }

    #[test]
    fn markov_equilibrium_passes_and_tilted_candidate_fails() {
        // Markov potential: phi(y) = 1/2 + 0.2 sin(2 pi y) sums to one over
        // the two halves branches, so rho = 1 and p = 0.
        let phi = parse("0.5 + 0.2*sin(2*pi*x)").unwrap();
        let maps = vec![parse("x/2").unwrap(), parse("(x + 1)/2").unwrap()];
        let n = 1024;
        let sys =
            WeightedSystem::<f64>::new(maps.clone(), Weights::Potential(phi.clone()), n).unwrap();
        let eq = lifted_equilibrium(&sys, n, 1e-10, 100_000).unwrap();
        let pressure = eq.triple.rho.ln();
        assert!(pressure.abs() <= 1e-9);
        let opts = DescentOptions::default();
        let report = equilibrium_check(
            &eq.measure.clone().into(),
            &phi,
            pressure,
            &eq.normalized,
            EntropyMethod::Alt,
            1e-3,
            &opts,
        )
        .unwrap();
        assert!(report.is_equilibrium, "defect = {}", report.defect);
        assert!(report.u_minus_v_sup <= 1e-6);
        assert!(report.marginal_defect <= 1e-8);

        // tilt the weights by 10% and renormalize: no longer an equilibrium
        let mut tilted = Vec::new();
        for i in 0..2 {
            let mut w = Vec::with_capacity(n + 1);
            for j in 0..=n {
                let x = j as f64 / n as f64;
                let v0 = eq.normalized.weight(0, x).unwrap() * 1.1;
                let v1 = eq.normalized.weight(1, x).unwrap() * 0.9;
                w.push(if i == 0 { v0 / (v0 + v1) } else { v1 / (v0 + v1) });
            }
            tilted.push(GridFunction::new(n, w).unwrap());
        }
        let tilted_sys =
            WeightedSystem::new(maps, Weights::PerMapGrid(tilted), n).unwrap();
        let tilted_m: HolonomicMeasure<f64> =
            lift(&tilted_sys, n, 1e-10, 100_000).unwrap().into();
        let report = equilibrium_check(
            &tilted_m,
            &phi,
            pressure,
            &eq.normalized,
            EntropyMethod::Alt,
            1e-3,
            &opts,
        )
        .unwrap();
        assert!(!report.is_equilibrium, "defect = {}", report.defect);
        assert!(report.defect >= 1e-3);
        assert!(report.u_minus_v_sup >= 0.01);
    }

    #[test]
    fn fixed_point_of_the_identity_branch_is_not_an_equilibrium() {
        let phi = parse("2 + cos(2*pi*x)").unwrap();
        let sys = example3(64);
        let w = Word::periodic(vec![0]).unwrap();
        let m: HolonomicMeasure<f64> = make_orbit_measure(&sys, 0.0, &w, 1).unwrap().into();
        let h = entropy_inf(&m, &Psi::one(), &DescentOptions::default()).unwrap();
        let integral = m.marginal_integrate_with(|x| ln_phi(&phi, x)).unwrap();
        // h + int ln phi = 0 + ln 3, far from p = ln 6
        assert!(h.value.abs() <= 1e-6);
        assert!((integral - 3.0f64.ln()).abs() <= 1e-14);
        assert!((h.value + integral - 6.0f64.ln()).abs() >= 0.5);
    }

    #[test]
    fn beta_sweep_integral_is_nondecreasing() {
        let maps = vec![parse("x/2").unwrap(), parse("(x + 1)/2").unwrap()];
        let phi = parse("2 + cos(2*pi*x)").unwrap();
        let betas = [1.0, 2.0, 4.0];
        let rows = beta_sweep(&maps, &phi, &betas, 256, 1e-10, 50_000).unwrap();
        assert_eq!(rows.len(), 3);
        for pair in rows.windows(2) {
            assert!(
                pair[1].integral_ln_phi >= pair[0].integral_ln_phi - 1e-8,
                "integral decreased: {} -> {}",
                pair[0].integral_ln_phi,
                pair[1].integral_ln_phi
            );
        }
        for row in &rows {
            assert!(row.converged, "beta = {} did not converge", row.beta);
            // pressure p(beta) >= beta * min ln phi > 0 for this potential
            assert!(row.pressure > 0.0);
        }
        // second differences of a convex pressure are nonnegative
        let p: Vec<f64> = rows.iter().map(|r| r.pressure).collect();
        assert!(p[2] - 2.0 * p[1] + p[0] >= -1e-6);
    }

    use proptest::prelude::*;

    /// Finds the point the branch composition cycles through by iterating
    /// it from the interior. 300 is a multiple of every period length up to
    /// 5, and the halves maps contract by 1/2 per digit, so the result lands
    /// within 2^-300 of the cycle.
    fn cycle_start(sys: &WeightedSystem<f64>, digits: &[u8]) -> f64 {
        let w = Word::periodic(digits.to_vec()).unwrap();
        crate::holonomic::branch(sys, 0.3, &w, 300).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        /// Both entropy formulas stay inside [0, ln d] on cycle measures
        /// with fair weights, and the descent reaches its tolerance.
        #[test]
        fn entropy_of_random_cycles_stays_in_range(
            digits in proptest::collection::vec(0u8..2, 1..=5),
        ) {
            let sys = halves_markov(64);
            let x0 = cycle_start(&sys, &digits);
            let w = Word::periodic(digits.clone()).unwrap();
            let m: HolonomicMeasure<f64> =
                make_orbit_measure(&sys, x0, &w, digits.len()).unwrap().into();

            let inf = entropy_inf(&m, &Psi::one(), &DescentOptions::default()).unwrap();
            let alt = entropy_alt(&m).unwrap();
            prop_assert!(inf.converged);
            let top = 2.0f64.ln();
            prop_assert!(inf.value >= -1e-9 && inf.value <= top + 1e-9,
                "inf entropy {} outside [0, ln 2]", inf.value);
            prop_assert!(alt.value >= -1e-9 && alt.value <= top + 1e-9,
                "alt entropy {} outside [0, ln 2]", alt.value);
        }

        /// No candidate beats the spectral pressure: entropy plus energy of
        /// any cycle measure stays below ln rho.
        #[test]
        fn cycle_scores_never_exceed_the_spectral_pressure(
            digits in proptest::collection::vec(0u8..2, 1..=5),
        ) {
            let n = 64;
            let phi = parse("2 + cos(2*pi*x)").unwrap();
            let sys = WeightedSystem::<f64>::new(
                vec![parse("x/2").unwrap(), parse("(x + 1)/2").unwrap()],
                Weights::Potential(phi.clone()),
                n,
            )
            .unwrap();
            // The branch images average the cosine away: the two weights sum
            // to 4 at every point, so the spectral value is exact here.
            let spectral = pressure_spectral(&sys, n, 1e-12, 10_000).unwrap();
            prop_assert!(spectral.converged);

            let x0 = cycle_start(&sys, &digits);
            let w = Word::periodic(digits.clone()).unwrap();
            let m: HolonomicMeasure<f64> =
                make_orbit_measure(&sys, x0, &w, digits.len()).unwrap().into();
            let report = pressure_variational(
                &phi,
                std::slice::from_ref(&m),
                EntropyMethod::Inf,
                &DescentOptions::default(),
            )
            .unwrap();
            prop_assert!(report.converged);
            prop_assert!(
                report.value <= spectral.value + 1e-6,
                "candidate scored {} above the spectral value {}",
                report.value,
                spectral.value
            );
        }
    }
}
