//! Holonomic probabilities on `[0,1] x Sigma`: orbit measures built from
//! returning orbits, liftings of invariant node measures, and the checks
//! (holonomy, shift invariance, disintegration) that characterize them.
//!
//! Symbol sequences are restricted to eventually periodic words, which is
//! enough to represent orbit-measure atoms and cylinder tests exactly;
//! lifted measures handle general sequences implicitly through branch-weight
//! products.

use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridMeasure};
use crate::operator::{check_markov, spectral_triple, TransferMatrix, WeightedSystem};
use crate::scalar::Real;

/// An eventually periodic one-sided symbol sequence: the digits of
/// `preperiod` followed by `period` repeated forever.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Word {
    preperiod: Vec<u8>,
    period: Vec<u8>,
}

impl Word {
    pub fn new(preperiod: Vec<u8>, period: Vec<u8>) -> Result<Self> {
        if period.is_empty() {
            return Err(Error::InvalidWord("period must be nonempty".into()));
        }
        Ok(Self { preperiod, period })
    }

    /// Purely periodic word.
    pub fn periodic(period: Vec<u8>) -> Result<Self> {
        Self::new(Vec::new(), period)
    }

    pub fn preperiod(&self) -> &[u8] {
        &self.preperiod
    }

    pub fn period(&self) -> &[u8] {
        &self.period
    }

    /// Digit at position `t` (0-based) of the infinite stream.
    pub fn digit(&self, t: usize) -> u8 {
        if t < self.preperiod.len() {
            self.preperiod[t]
        } else {
            self.period[(t - self.preperiod.len()) % self.period.len()]
        }
    }

    /// First symbol of the stream.
    pub fn head(&self) -> u8 {
        self.digit(0)
    }

    pub fn max_digit(&self) -> u8 {
        self.preperiod
            .iter()
            .chain(&self.period)
            .copied()
            .max()
            .unwrap_or(0)
    }

    /// Drops the head symbol: shortens the preperiod, or rotates the period
    /// once the preperiod is exhausted.
    pub fn shift(&self) -> Word {
        if !self.preperiod.is_empty() {
            Word {
                preperiod: self.preperiod[1..].to_vec(),
                period: self.period.clone(),
            }
        } else {
            let mut rotated = self.period[1..].to_vec();
            rotated.push(self.period[0]);
            Word {
                preperiod: Vec::new(),
                period: rotated,
            }
        }
    }

    pub fn shift_by(&self, k: usize) -> Word {
        let mut w = self.clone();
        for _ in 0..k {
            w = w.shift();
        }
        w
    }

    /// Whether the first `prefix.len()` stream digits equal `prefix`.
    pub fn starts_with(&self, prefix: &[u8]) -> bool {
        prefix.iter().enumerate().all(|(t, &c)| self.digit(t) == c)
    }

    /// Stream equality. Two eventually periodic streams coincide iff they
    /// agree on `max(preperiods) + lcm(periods)` leading digits.
    pub fn stream_eq(&self, other: &Word) -> bool {
        let a = self.preperiod.len().max(other.preperiod.len());
        let bound = a + lcm(self.period.len(), other.period.len());
        (0..bound).all(|t| self.digit(t) == other.digit(t))
    }
}

impl std::fmt::Display for Word {
    /// `"11(0)"` for preperiod 1,1 and period 0; digits above 9 are
    /// comma-separated to stay unambiguous.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let wide = self.max_digit() > 9;
        let join = |digits: &[u8]| -> String {
            let parts: Vec<String> = digits.iter().map(|d| d.to_string()).collect();
            parts.join(if wide { "," } else { "" })
        };
        write!(f, "{}({})", join(&self.preperiod), join(&self.period))
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

/// `Z_n(x, w)`: the point reached from `x` after applying the maps named by
/// the first `n` digits of `w`.
pub fn branch<F: Real>(sys: &WeightedSystem<F>, x0: F, w: &Word, n: usize) -> Result<F> {
    check_digits(sys, w)?;
    let mut x = x0;
    for t in 0..n {
        x = sys.apply_map(w.digit(t) as usize, x)?;
    }
    Ok(x)
}

fn check_digits<F: Real>(sys: &WeightedSystem<F>, w: &Word) -> Result<()> {
    let d = sys.branch_count();
    if (w.max_digit() as usize) < d {
        Ok(())
    } else {
        Err(Error::InvalidWord(format!(
            "word {w} uses digit {} but the system has {d} branches",
            w.max_digit()
        )))
    }
}

/// Uniform atomic measure along a returning orbit: atoms
/// `(Z_j, sigma^j(w))` for `j = 0..n-1`, each of mass `1/n`.
///
/// The orbit must return in the x coordinate: `|Z_n - x0| <= eps_cycle`.
/// The word stream need not be n-periodic; when it is not, the measure is
/// still holonomic (the x cycle closes) but not shift invariant, which
/// `sigma_invariance_defect` quantifies.
#[derive(Debug, Clone)]
pub struct OrbitMeasure<F> {
    sys: WeightedSystem<F>,
    atoms: Vec<(F, Word)>,
    /// Map images `Z_{j+1}` of each atom; the last entry is the return
    /// point `Z_n`.
    next_points: Vec<F>,
    return_defect: F,
}

pub fn make_orbit_measure<F: Real>(
    sys: &WeightedSystem<F>,
    x0: F,
    w: &Word,
    n: usize,
) -> Result<OrbitMeasure<F>> {
    if n == 0 {
        return Err(Error::InvalidWord("orbit length must be positive".into()));
    }
    check_digits(sys, w)?;
    let mut atoms = Vec::with_capacity(n);
    let mut next_points = Vec::with_capacity(n);
    let mut x = crate::grid::clamp_unit(x0)?;
    let mut word = w.clone();
    for _ in 0..n {
        let y = sys.apply_map(word.head() as usize, x)?;
        atoms.push((x, word.clone()));
        next_points.push(y);
        x = y;
        word = word.shift();
    }
    let return_defect = (x - atoms[0].0).abs();
    if return_defect > F::eps_cycle() {
        return Err(Error::NonReturningOrbit {
            defect: return_defect.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(OrbitMeasure {
        sys: sys.clone(),
        atoms,
        next_points,
        return_defect,
    })
}

impl<F: Real> OrbitMeasure<F> {
    pub fn atoms(&self) -> &[(F, Word)] {
        &self.atoms
    }

    pub fn atom_mass(&self) -> F {
        F::one() / F::of(self.atoms.len() as f64)
    }

    pub fn next_points(&self) -> &[F] {
        &self.next_points
    }

    pub fn return_defect(&self) -> F {
        self.return_defect
    }

    pub fn system(&self) -> &WeightedSystem<F> {
        &self.sys
    }

    /// Test-only escape hatch for building invalid atom lists (negative
    /// controls for the defect detectors).
    #[cfg(test)]
    pub(crate) fn from_raw_parts(
        sys: WeightedSystem<F>,
        atoms: Vec<(F, Word)>,
        next_points: Vec<F>,
    ) -> Self {
        Self {
            sys,
            atoms,
            next_points,
            return_defect: F::zero(),
        }
    }
}

/// Lifting of an invariant node measure through a Markov system: the
/// product of `base` with the path measures of the branch weights.
#[derive(Debug, Clone)]
pub struct LiftedMeasure<F> {
    sys: WeightedSystem<F>,
    base: GridMeasure<F>,
    markov_defect: F,
    invariance_defect: F,
}

impl<F: Real> LiftedMeasure<F> {
    /// Validates that `sys` is Markov (row sums one within `eps_markov`)
    /// and that `base` is fixed by the adjoint within the same tolerance.
    pub fn new(sys: WeightedSystem<F>, base: GridMeasure<F>) -> Result<Self> {
        let n = base.n();
        let markov_defect = check_markov(&sys, n)?;
        if markov_defect > F::eps_markov() {
            return Err(Error::InvalidMeasure(format!(
                "lifting requires a Markov system; row-sum defect {}",
                markov_defect.to_f64().unwrap_or(f64::NAN)
            )));
        }
        let m = TransferMatrix::assemble(&sys, n)?;
        let pushed = m.apply_dual(base.weights());
        let invariance_defect = pushed
            .iter()
            .zip(base.weights())
            .fold(F::zero(), |a, (&p, &b)| a + (p - b).abs());
        if invariance_defect > F::eps_markov() {
            return Err(Error::InvalidMeasure(format!(
                "base measure is not fixed by the adjoint; l1 defect {}",
                invariance_defect.to_f64().unwrap_or(f64::NAN)
            )));
        }
        Ok(Self {
            sys,
            base,
            markov_defect,
            invariance_defect,
        })
    }

    pub fn base(&self) -> &GridMeasure<F> {
        &self.base
    }

    pub fn system(&self) -> &WeightedSystem<F> {
        &self.sys
    }

    pub fn markov_defect(&self) -> F {
        self.markov_defect
    }

    pub fn invariance_defect(&self) -> F {
        self.invariance_defect
    }
}

/// Computes the adjoint-fixed base measure of a Markov system by power
/// iteration and lifts it.
pub fn lift<F: Real>(
    sys: &WeightedSystem<F>,
    n: usize,
    tol: F,
    max_iter: usize,
) -> Result<LiftedMeasure<F>> {
    let triple = spectral_triple(sys, n, tol, max_iter)?;
    LiftedMeasure::new(sys.clone(), triple.nu)
}

/// Either kind of representable holonomic probability.
#[derive(Debug, Clone)]
pub enum HolonomicMeasure<F> {
    Orbit(OrbitMeasure<F>),
    Lifted(LiftedMeasure<F>),
}

impl<F: Real> From<OrbitMeasure<F>> for HolonomicMeasure<F> {
    fn from(m: OrbitMeasure<F>) -> Self {
        HolonomicMeasure::Orbit(m)
    }
}

impl<F: Real> From<LiftedMeasure<F>> for HolonomicMeasure<F> {
    fn from(m: LiftedMeasure<F>) -> Self {
        HolonomicMeasure::Lifted(m)
    }
}

impl<F: Real> HolonomicMeasure<F> {
    pub fn system(&self) -> &WeightedSystem<F> {
        match self {
            HolonomicMeasure::Orbit(m) => m.system(),
            HolonomicMeasure::Lifted(m) => m.system(),
        }
    }

    pub fn branch_count(&self) -> usize {
        self.system().branch_count()
    }

    /// Integral of a grid function against the x marginal. Orbit atoms use
    /// interpolation; lifted measures integrate at the nodes.
    pub fn marginal_integrate(&self, f: &GridFunction<F>) -> Result<F> {
        match self {
            HolonomicMeasure::Orbit(m) => {
                let mass = m.atom_mass();
                let mut acc = F::zero();
                for (x, _) in &m.atoms {
                    acc = acc + mass * f.interp_eval(*x)?;
                }
                Ok(acc)
            }
            HolonomicMeasure::Lifted(m) => m.base.integrate(f),
        }
    }

    /// Integral of an exactly evaluated function against the x marginal.
    pub fn marginal_integrate_with(&self, f: impl Fn(F) -> Result<F>) -> Result<F> {
        match self {
            HolonomicMeasure::Orbit(m) => {
                let mass = m.atom_mass();
                let mut acc = F::zero();
                for (x, _) in &m.atoms {
                    acc = acc + mass * f(*x)?;
                }
                Ok(acc)
            }
            HolonomicMeasure::Lifted(m) => {
                let mut acc = F::zero();
                for (j, &w) in m.base.weights().iter().enumerate() {
                    acc = acc + w * f(crate::grid::node_x(j, m.base.n()))?;
                }
                Ok(acc)
            }
        }
    }
}

/// Standard holonomy test battery: the monomials `1, x, x^2, x^3`.
pub fn monomial_tests<F: Real>(n: usize) -> Vec<GridFunction<F>> {
    (0..4)
        .map(|p| {
            GridFunction::from_fn(n, |x: F| {
                let mut v = F::one();
                for _ in 0..p {
                    v = v * x;
                }
                v
            })
            .expect("monomial values are finite")
        })
        .collect()
}

/// Extended battery: monomials plus low-frequency trigonometric functions.
pub fn default_test_battery<F: Real>(n: usize) -> Vec<GridFunction<F>> {
    let mut battery = monomial_tests(n);
    let tau = F::of(std::f64::consts::TAU);
    for k in 1..=2usize {
        let kk = F::of(k as f64);
        battery.push(
            GridFunction::from_fn(n, |x: F| (tau * kk * x).sin()).expect("finite"),
        );
        battery.push(
            GridFunction::from_fn(n, |x: F| (tau * kk * x).cos()).expect("finite"),
        );
    }
    battery
}

/// Max over `tests` of `|int f(tau_{X1(w)}(x)) dm - int f dm|`.
///
/// Orbit measures telescope over the cycle, so valid ones score at the
/// return-defect level. Lifted measures score at the level of the adjoint
/// fixed-point residual.
pub fn holonomy_defect<F: Real>(
    m: &HolonomicMeasure<F>,
    tests: &[GridFunction<F>],
) -> Result<F> {
    if tests.is_empty() {
        return Err(Error::InvalidInput("empty holonomy test battery".into()));
    }
    let mut worst = F::zero();
    for f in tests {
        let defect = match m {
            HolonomicMeasure::Orbit(om) => {
                let mass = om.atom_mass();
                let mut acc = F::zero();
                for (j, (x, _)) in om.atoms.iter().enumerate() {
                    acc = acc + mass * (f.interp_eval(om.next_points[j])? - f.interp_eval(*x)?);
                }
                acc
            }
            HolonomicMeasure::Lifted(lm) => {
                let sys = &lm.sys;
                let n = lm.base.n();
                let mut acc = F::zero();
                for (j, &w) in lm.base.weights().iter().enumerate() {
                    let x = crate::grid::node_x(j, n);
                    let mut image = F::zero();
                    for i in 0..sys.branch_count() {
                        image = image + sys.weight(i, x)? * f.interp_eval(sys.apply_map(i, x)?)?;
                    }
                    acc = acc + w * (image - f.values()[j]);
                }
                acc
            }
        };
        worst = worst.max(defect.abs());
    }
    Ok(worst)
}

/// `|int g(sigma_hat(x,w)) dm - int g dm|` for the product test function
/// `g(x, w) = f(x) * 1{w starts with cylinder}`.
///
/// Orbit measures are summed exactly atom by atom. Lifted measures use the
/// product formula: the probability that the symbol stream at `x` starts
/// with the cylinder is the branch-weight path product, tabulated at the
/// nodes, and the shift acts through the transfer matrix adjoint.
pub fn sigma_invariance_defect<F: Real>(
    m: &HolonomicMeasure<F>,
    f: &GridFunction<F>,
    cylinder: &[u8],
) -> Result<F> {
    let d = m.branch_count();
    if cylinder.iter().any(|&c| c as usize >= d) {
        return Err(Error::InvalidWord(format!(
            "cylinder uses a digit outside 0..{d}"
        )));
    }
    match m {
        HolonomicMeasure::Orbit(om) => {
            let mass = om.atom_mass();
            let mut plain = F::zero();
            let mut shifted = F::zero();
            for (j, (x, w)) in om.atoms.iter().enumerate() {
                if w.starts_with(cylinder) {
                    plain = plain + mass * f.interp_eval(*x)?;
                }
                if w.shift().starts_with(cylinder) {
                    shifted = shifted + mass * f.interp_eval(om.next_points[j])?;
                }
            }
            Ok((shifted - plain).abs())
        }
        HolonomicMeasure::Lifted(lm) => {
            let n = lm.base.n();
            if f.n() != n {
                return Err(Error::GridMismatch {
                    left: f.n(),
                    right: n,
                });
            }
            // Node values of F(x) = f(x) * P(stream starts with cylinder).
            let mut fv = Vec::with_capacity(n + 1);
            for j in 0..=n {
                let x = crate::grid::node_x(j, n);
                fv.push(f.values()[j] * lm.sys.path_probability(x, cylinder)?);
            }
            let matrix = TransferMatrix::assemble(&lm.sys, n)?;
            let pushed = matrix.apply_dual(lm.base.weights());
            let mut plain = F::zero();
            let mut shifted = F::zero();
            for j in 0..=n {
                plain = plain + fv[j] * lm.base.weights()[j];
                shifted = shifted + fv[j] * pushed[j];
            }
            Ok((shifted - plain).abs())
        }
    }
}

/// Fiberwise decomposition of a holonomic measure: marginal fiber points
/// with their masses and the conditional branch weights `u_i(y)`.
#[derive(Debug, Clone)]
pub struct Disintegration<F> {
    /// Fiber points (orbit: coincidence-clustered atom positions; lifted:
    /// every grid node).
    pub support: Vec<F>,
    /// Marginal mass of each fiber.
    pub masses: Vec<F>,
    /// `branch[i][k]` = conditional weight of branch `i` at `support[k]`;
    /// each fiber's weights sum to one.
    pub branch: Vec<Vec<F>>,
}

/// Groups the indices of `xs` into clusters of values within `eps_atom` of
/// their cluster's running extent, scanning in sorted order.
pub(crate) fn cluster_indices<F: Real>(xs: &[F]) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).expect("finite").then(a.cmp(&b)));
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut last: Option<F> = None;
    for idx in order {
        match last {
            Some(prev) if (xs[idx] - prev).abs() <= F::eps_atom() => {
                clusters.last_mut().expect("nonempty").push(idx);
            }
            _ => clusters.push(vec![idx]),
        }
        last = Some(xs[idx]);
    }
    clusters
}

/// Disintegrates a holonomic measure into its marginal and conditional
/// branch weights. For orbit measures, atoms at coinciding positions
/// (within the atom tolerance) share a fiber and the conditional weight of
/// branch `i` is the fraction of their mass whose word starts with `i`.
/// Lifted measures return their stored `(base, v)` pair directly.
pub fn disintegrate<F: Real>(m: &HolonomicMeasure<F>) -> Result<Disintegration<F>> {
    let d = m.branch_count();
    match m {
        HolonomicMeasure::Orbit(om) => {
            let xs: Vec<F> = om.atoms.iter().map(|(x, _)| *x).collect();
            let clusters = cluster_indices(&xs);
            let mass = om.atom_mass();
            let mut support = Vec::with_capacity(clusters.len());
            let mut masses = Vec::with_capacity(clusters.len());
            let mut branch = vec![vec![F::zero(); clusters.len()]; d];
            for (k, cluster) in clusters.iter().enumerate() {
                let total = F::of(cluster.len() as f64);
                let mut center = F::zero();
                for &idx in cluster {
                    center = center + xs[idx] / total;
                    let head = om.atoms[idx].1.head() as usize;
                    branch[head][k] = branch[head][k] + F::one() / total;
                }
                support.push(center);
                masses.push(mass * total);
            }
            Ok(Disintegration {
                support,
                masses,
                branch,
            })
        }
        HolonomicMeasure::Lifted(lm) => {
            let n = lm.base.n();
            let support: Vec<F> = (0..=n).map(|j| crate::grid::node_x(j, n)).collect();
            let mut branch = Vec::with_capacity(d);
            for i in 0..d {
                let mut row = Vec::with_capacity(n + 1);
                for &x in &support {
                    row.push(lm.sys.weight(i, x)?);
                }
                branch.push(row);
            }
            Ok(Disintegration {
                support,
                masses: lm.base.weights().to_vec(),
                branch,
            })
        }
    }
}

/// Max over `tests` of the difference between the marginal and its
/// pushforward through the disintegrated `(tau_i, u_i)` pair. Small values
/// certify that the marginal is invariant for the disintegrated weights.
pub fn marginal_invariance_defect<F: Real>(
    m: &HolonomicMeasure<F>,
    tests: &[GridFunction<F>],
) -> Result<F> {
    if tests.is_empty() {
        return Err(Error::InvalidInput("empty test battery".into()));
    }
    let dis = disintegrate(m)?;
    let sys = m.system();
    let mut worst = F::zero();
    for f in tests {
        let mut acc = F::zero();
        for (k, &y) in dis.support.iter().enumerate() {
            let mut image = F::zero();
            for (i, row) in dis.branch.iter().enumerate() {
                if row[k] > F::zero() {
                    image = image + row[k] * f.interp_eval(sys.apply_map(i, y)?)?;
                }
            }
            acc = acc + dis.masses[k] * (image - f.interp_eval(y)?);
        }
        worst = worst.max(acc.abs());
    }
    Ok(worst)
}

/// `sum_i int f(tau_i(x)) dm - int f dm` for nonnegative `f`; the sum
/// dominates the holonomy identity's single term, so the result is
/// nonnegative up to the measure's defects.
pub fn holonomic_inequality_defect<F: Real>(
    m: &HolonomicMeasure<F>,
    f: &GridFunction<F>,
) -> Result<F> {
    if f.min_value() < F::zero() {
        return Err(Error::NotPositive(
            "holonomic inequality requires a nonnegative test function".into(),
        ));
    }
    let sys = m.system();
    let d = sys.branch_count();
    let summed = m.marginal_integrate_with(|x| {
        let mut acc = F::zero();
        for i in 0..d {
            acc = acc + f.interp_eval(sys.apply_map(i, x)?)?;
        }
        Ok(acc)
    })?;
    let plain = m.marginal_integrate(f)?;
    Ok(summed - plain)
}
