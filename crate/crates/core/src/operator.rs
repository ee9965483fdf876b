//! Weighted interval IFS and the associated transfer operator.
//!
//! A system is a family of maps `tau_i: [0,1] -> [0,1]` with nonnegative
//! weights `u_i`. The transfer operator acts on grid functions by
//! `(P_u f)(x) = sum_i u_i(x) f(tau_i(x))`; discretized with linear
//! interpolation it becomes a sparse row matrix with at most two entries per
//! branch and row. Its adjoint pushes node measures forward by mass
//! splitting, so `<P_u f, m> = <f, P_u* m>` holds at the matrix level.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::expr::{validate_map_range, ExprAst};
use crate::grid::{clamp_unit, fmt_sig, node_split, node_x, GridFunction, GridMeasure};
use crate::scalar::{max_entry, sup_norm, Real};

/// How branch weights are supplied.
#[derive(Debug, Clone)]
pub enum Weights<F> {
    /// One weight expression per map.
    PerMapExpr(Vec<ExprAst>),
    /// A single potential `phi`; branch weights are `u_i(x) = phi(tau_i(x))`.
    Potential(ExprAst),
    /// One tabulated weight per map, evaluated by interpolation.
    PerMapGrid(Vec<GridFunction<F>>),
}

/// A weighted iterated function system on `[0,1]`.
#[derive(Debug, Clone)]
pub struct WeightedSystem<F> {
    maps: Vec<ExprAst>,
    weights: Weights<F>,
}

impl<F: Real> WeightedSystem<F> {
    /// Builds a system, checking that every map keeps the `n`-cell grid
    /// nodes inside `[0,1]` and that every weight is nonnegative at the
    /// nodes. Validation samples nodes only; off-node violations surface as
    /// errors in downstream evaluations.
    pub fn new(maps: Vec<ExprAst>, weights: Weights<F>, n: usize) -> Result<Self> {
        if maps.is_empty() {
            return Err(Error::InvalidSystem("at least one map required".into()));
        }
        match &weights {
            Weights::PerMapExpr(u) if u.len() != maps.len() => {
                return Err(Error::InvalidSystem(format!(
                    "{} maps but {} weights",
                    maps.len(),
                    u.len()
                )))
            }
            Weights::PerMapGrid(u) if u.len() != maps.len() => {
                return Err(Error::InvalidSystem(format!(
                    "{} maps but {} weights",
                    maps.len(),
                    u.len()
                )))
            }
            _ => {}
        }
        for m in &maps {
            validate_map_range::<F>(m, n)?;
        }
        let sys = Self { maps, weights };
        for i in 0..sys.branch_count() {
            for j in 0..=n {
                let w = sys.weight(i, node_x(j, n))?;
                if w < F::zero() {
                    return Err(Error::InvalidSystem(format!(
                        "weight {i} is negative at x = {}",
                        j as f64 / n as f64
                    )));
                }
            }
        }
        Ok(sys)
    }

    pub fn branch_count(&self) -> usize {
        self.maps.len()
    }

    pub fn maps(&self) -> &[ExprAst] {
        &self.maps
    }

    pub fn weights(&self) -> &Weights<F> {
        &self.weights
    }

    /// The potential when the system is in potential mode.
    pub fn potential(&self) -> Option<&ExprAst> {
        match &self.weights {
            Weights::Potential(phi) => Some(phi),
            _ => None,
        }
    }

    /// Grid resolution of tabulated weights, if any.
    pub fn natural_grid(&self) -> Option<usize> {
        match &self.weights {
            Weights::PerMapGrid(u) => u.first().map(|g| g.n()),
            _ => None,
        }
    }

    /// Applies map `i`, clamping results within `eps_range` of `[0,1]`.
    pub fn apply_map(&self, i: usize, x: F) -> Result<F> {
        clamp_unit(self.maps[i].evaluate(x)?)
    }

    /// Weight of branch `i` at `x`.
    pub fn weight(&self, i: usize, x: F) -> Result<F> {
        match &self.weights {
            Weights::PerMapExpr(u) => u[i].evaluate(x),
            Weights::Potential(phi) => phi.evaluate(self.apply_map(i, x)?),
            Weights::PerMapGrid(u) => u[i].interp_eval(x),
        }
    }

    /// Probability of the symbol string `digits` starting from `x`: the
    /// product of branch weights, each evaluated at the state *before* its
    /// map is applied. Under this convention the masses of all `d^n` strings
    /// of length `n` sum to one for a Markov system.
    pub fn path_probability(&self, x: F, digits: &[u8]) -> Result<F> {
        let mut p = F::one();
        let mut y = clamp_unit(x)?;
        for &i in digits {
            let i = i as usize;
            if i >= self.branch_count() {
                return Err(Error::InvalidWord(format!(
                    "symbol {i} out of range for {} branches",
                    self.branch_count()
                )));
            }
            p = p * self.weight(i, y)?;
            y = self.apply_map(i, y)?;
        }
        Ok(p)
    }
}

/// Appends the row-`j` matrix entries for the `n`-cell discretization.
/// Entry order is branch major, low node before high node; both assembly and
/// direct application use this routine so they agree bit for bit.
fn push_row_entries<F: Real>(
    sys: &WeightedSystem<F>,
    n: usize,
    j: usize,
    out: &mut Vec<(usize, F)>,
) -> Result<()> {
    let x = node_x(j, n);
    for i in 0..sys.branch_count() {
        let w = sys.weight(i, x)?;
        if w < F::zero() {
            return Err(Error::InvalidSystem(format!(
                "weight {i} is negative at x = {}",
                x.to_f64().unwrap_or(f64::NAN)
            )));
        }
        let y = sys.apply_map(i, x)?;
        let (k, theta) = node_split(y, n)?;
        if theta < F::one() {
            out.push((k, w * (F::one() - theta)));
        }
        if theta > F::zero() {
            out.push((k + 1, w * theta));
        }
    }
    Ok(())
}

/// Sparse row representation of the discretized transfer operator.
#[derive(Debug, Clone)]
pub struct TransferMatrix<F> {
    n: usize,
    rows: Vec<Vec<(usize, F)>>,
}

impl<F: Real> TransferMatrix<F> {
    pub fn assemble(sys: &WeightedSystem<F>, n: usize) -> Result<Self> {
        let mut rows = Vec::with_capacity(n + 1);
        for j in 0..=n {
            let mut row = Vec::with_capacity(2 * sys.branch_count());
            push_row_entries(sys, n, j, &mut row)?;
            rows.push(row);
        }
        Ok(Self { n, rows })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `M v`: one output entry per row, summed in stored entry order.
    pub fn apply(&self, values: &[F]) -> Vec<F> {
        self.rows
            .iter()
            .map(|row| {
                row.iter()
                    .fold(F::zero(), |acc, &(k, c)| acc + c * values[k])
            })
            .collect()
    }

    /// `M^T w`: scatters each row's entries, in row then entry order.
    pub fn apply_dual(&self, weights: &[F]) -> Vec<F> {
        let mut out = vec![F::zero(); self.n + 1];
        for (j, row) in self.rows.iter().enumerate() {
            let wj = weights[j];
            for &(k, c) in row {
                out[k] = out[k] + c * wj;
            }
        }
        out
    }

    pub fn row_sums(&self) -> Vec<F> {
        self.rows
            .iter()
            .map(|row| row.iter().fold(F::zero(), |a, &(_, c)| a + c))
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<F>> {
        let mut dense = vec![vec![F::zero(); self.n + 1]; self.n + 1];
        for (j, row) in self.rows.iter().enumerate() {
            for &(k, c) in row {
                dense[j][k] = dense[j][k] + c;
            }
        }
        dense
    }

    /// Dense CSV dump, mainly for debugging small grids.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        for row in self.to_dense() {
            let cells: Vec<String> = row.iter().map(|&c| fmt_sig(c)).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// Applies the transfer operator to a grid function without materializing
/// the matrix. Bit-identical to `TransferMatrix::apply` on the node values.
pub fn apply_transfer<F: Real>(
    sys: &WeightedSystem<F>,
    f: &GridFunction<F>,
) -> Result<GridFunction<F>> {
    let n = f.n();
    let mut row = Vec::with_capacity(2 * sys.branch_count());
    let mut out = Vec::with_capacity(n + 1);
    for j in 0..=n {
        row.clear();
        push_row_entries(sys, n, j, &mut row)?;
        out.push(
            row.iter()
                .fold(F::zero(), |acc, &(k, c)| acc + c * f.values()[k]),
        );
    }
    GridFunction::new(n, out)
}

/// Sup-distance of the row sums from one. Zero means the system is Markov
/// (the transfer operator fixes constants) at this resolution.
pub fn check_markov<F: Real>(sys: &WeightedSystem<F>, n: usize) -> Result<F> {
    let ones = GridFunction::constant(n, F::one())?;
    let image = apply_transfer(sys, &ones)?;
    Ok(image
        .values()
        .iter()
        .fold(F::zero(), |a, &v| a.max((v - F::one()).abs())))
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpectralWarning {
    /// Residuals still above tolerance when iteration stopped.
    NotConverged { residual_h: f64, residual_nu: f64 },
    /// Sup-ratio and Rayleigh estimates of the leading eigenvalue disagree,
    /// typical of a reducible (non-primitive) discretization.
    NonPrimitive { gap: f64 },
    /// Eigenfunction min/max ratio below 1e-6; the discrete Perron data
    /// concentrates on few nodes and need not reflect the continuous system.
    Concentrated { ratio: f64 },
}

impl std::fmt::Display for SpectralWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SpectralWarning::NotConverged {
                residual_h,
                residual_nu,
            } => write!(
                f,
                "power iteration did not converge: residual_h = {residual_h:.3e}, residual_nu = {residual_nu:.3e}"
            ),
            SpectralWarning::NonPrimitive { gap } => write!(
                f,
                "sup-ratio and Rayleigh eigenvalue estimates differ by {gap:.3e}; discretization may be non-primitive"
            ),
            SpectralWarning::Concentrated { ratio } => write!(
                f,
                "eigenfunction min/max ratio {ratio:.3e}; discrete Perron data is concentrated"
            ),
        }
    }
}

/// Leading eigendata of the discretized transfer operator.
#[derive(Debug, Clone)]
pub struct SpectralTriple<F> {
    /// Spectral radius estimate: sup-norm growth ratio of the eigenfunction
    /// iteration.
    pub rho: F,
    /// Eigenfunction, normalized to `max h = 1`. Nonnegative.
    pub h: GridFunction<F>,
    /// Dual eigenmeasure, normalized to total mass one.
    pub nu: GridMeasure<F>,
    /// `sup |M h - rho h| / max(1, rho)` with `sup h = 1`.
    pub residual_h: F,
    /// `sup |M^T nu - rho nu| / (sup nu * max(1, rho))`.
    pub residual_nu: F,
    pub iterations: usize,
    /// `|rho - <M h, nu> / <h, nu>|`.
    pub rayleigh_gap: F,
    pub warnings: Vec<SpectralWarning>,
}

impl<F: Real> SpectralTriple<F> {
    pub fn converged(&self) -> bool {
        !self
            .warnings
            .iter()
            .any(|w| matches!(w, SpectralWarning::NotConverged { .. }))
    }
}

/// Power iteration for the leading eigenfunction and eigenmeasure.
///
/// Starts from the constant function and the uniform node measure, stops
/// when both sup-norm residuals drop below `tol` or after `max_iter` rounds.
/// Residuals are measured relative to `max(1, rho)`: the raw defect
/// `|P_n h - rho h|` carries rounding noise of order `rho * eps`, so an
/// absolute test could never pass for large eigenvalues. Non-convergence,
/// estimate mismatch and eigenfunction concentration are reported as
/// warnings, not errors, so degenerate but structurally valid systems can
/// still be inspected.
pub fn spectral_triple<F: Real>(
    sys: &WeightedSystem<F>,
    n: usize,
    tol: F,
    max_iter: usize,
) -> Result<SpectralTriple<F>> {
    let m = TransferMatrix::assemble(sys, n)?;
    if max_entry(&m.row_sums()) <= F::zero() {
        return Err(Error::Spectral(
            "operator annihilates the positive cone (all row sums are zero)".into(),
        ));
    }

    let dim = n + 1;
    let mut f = vec![F::one(); dim];
    let mut w = vec![F::one() / F::of(dim as f64); dim];
    let mut iterations = 0;

    for k in 1..=max_iter {
        iterations = k;

        let g = m.apply(&f);
        let rho_k = max_entry(&g);
        if rho_k <= F::zero() {
            return Err(Error::Spectral("iterate collapsed to zero".into()));
        }
        let res_h = g
            .iter()
            .zip(&f)
            .fold(F::zero(), |a, (&gi, &fi)| a.max((gi - rho_k * fi).abs()))
            / F::one().max(rho_k);
        for (fi, gi) in f.iter_mut().zip(&g) {
            *fi = *gi / rho_k;
        }

        let z = m.apply_dual(&w);
        let s = z.iter().fold(F::zero(), |a, &v| a + v);
        if s <= F::zero() {
            return Err(Error::Spectral("dual iterate collapsed to zero".into()));
        }
        let res_nu = z
            .iter()
            .zip(&w)
            .fold(F::zero(), |a, (&zi, &wi)| a.max((zi - s * wi).abs()))
            / (sup_norm(&w) * F::one().max(s));
        for (wi, zi) in w.iter_mut().zip(&z) {
            *wi = *zi / s;
        }

        if res_h <= tol && res_nu <= tol {
            break;
        }
    }

    // Clean residuals for the returned pair, both measured against the
    // final sup-ratio estimate of rho.
    let g = m.apply(&f);
    let rho = max_entry(&g);
    let scale = F::one().max(rho);
    let residual_h = g
        .iter()
        .zip(&f)
        .fold(F::zero(), |a, (&gi, &fi)| a.max((gi - rho * fi).abs()))
        / scale;
    let z = m.apply_dual(&w);
    let residual_nu = z
        .iter()
        .zip(&w)
        .fold(F::zero(), |a, (&zi, &wi)| a.max((zi - rho * wi).abs()))
        / (sup_norm(&w) * scale);

    let fw: F = f
        .iter()
        .zip(&w)
        .fold(F::zero(), |a, (&fi, &wi)| a + fi * wi);
    let gw: F = g
        .iter()
        .zip(&w)
        .fold(F::zero(), |a, (&gi, &wi)| a + gi * wi);
    let rayleigh_gap = if fw > F::zero() {
        (gw / fw - rho).abs()
    } else {
        F::infinity()
    };

    let mut warnings = Vec::new();
    if residual_h > tol || residual_nu > tol {
        warnings.push(SpectralWarning::NotConverged {
            residual_h: residual_h.to_f64().unwrap_or(f64::NAN),
            residual_nu: residual_nu.to_f64().unwrap_or(f64::NAN),
        });
    }
    if rayleigh_gap > F::of(1e-8) * F::one().max(rho) {
        warnings.push(SpectralWarning::NonPrimitive {
            gap: rayleigh_gap.to_f64().unwrap_or(f64::NAN),
        });
    }
    let ratio = crate::scalar::min_entry(&f) / max_entry(&f);
    if ratio < F::of(1e-6) {
        warnings.push(SpectralWarning::Concentrated {
            ratio: ratio.to_f64().unwrap_or(f64::NAN),
        });
    }

    Ok(SpectralTriple {
        rho,
        h: GridFunction::new(n, f)?,
        nu: GridMeasure::from_unnormalized(n, w)?,
        residual_h,
        residual_nu,
        iterations,
        rayleigh_gap,
        warnings,
    })
}

/// Normalizes a system by its leading eigendata:
/// `v_i(x) = u_i(x) h(tau_i(x)) / (rho h(x))`, tabulated at the nodes of
/// `triple.h`'s grid, together with `mu` proportional to `h * nu`. The
/// normalized system is Markov up to the spectral residuals, and for an
/// already Markov input `v = u` at the nodes.
pub fn normalize_system<F: Real>(
    sys: &WeightedSystem<F>,
    triple: &SpectralTriple<F>,
) -> Result<(WeightedSystem<F>, GridMeasure<F>)> {
    let n = triple.h.n();
    if !triple.h.is_positive() {
        return Err(Error::NotPositive(
            "eigenfunction has non-positive nodes; system cannot be normalized".into(),
        ));
    }
    if triple.rho <= F::zero() {
        return Err(Error::Spectral("non-positive spectral radius".into()));
    }
    let mut tabulated = Vec::with_capacity(sys.branch_count());
    for i in 0..sys.branch_count() {
        let mut v = Vec::with_capacity(n + 1);
        for j in 0..=n {
            let x = node_x(j, n);
            let num = sys.weight(i, x)? * triple.h.interp_eval(sys.apply_map(i, x)?)?;
            v.push(num / (triple.rho * triple.h.values()[j]));
        }
        tabulated.push(GridFunction::new(n, v)?);
    }
    let normalized = WeightedSystem::new(sys.maps().to_vec(), Weights::PerMapGrid(tabulated), n)?;
    let mu_weights: Vec<F> = triple
        .h
        .values()
        .iter()
        .zip(triple.nu.weights())
        .map(|(&h, &nu)| h * nu)
        .collect();
    let mu = GridMeasure::from_unnormalized(n, mu_weights)?;
    Ok((normalized, mu))
}

/// Conjugates the weights by a positive grid function:
/// `u'_i(x) = u_i(x) h(tau_i(x)) / h(x)`, tabulated on `h`'s grid. The
/// spectral radius is invariant under conjugation; discretely the identity
/// holds up to interpolation error of order `(Lip(h)/n)^2`.
pub fn conjugate_system<F: Real>(
    sys: &WeightedSystem<F>,
    h: &GridFunction<F>,
) -> Result<WeightedSystem<F>> {
    if !h.is_positive() {
        return Err(Error::NotPositive("conjugating function".into()));
    }
    let n = h.n();
    let mut tabulated = Vec::with_capacity(sys.branch_count());
    for i in 0..sys.branch_count() {
        let mut v = Vec::with_capacity(n + 1);
        for j in 0..=n {
            let x = node_x(j, n);
            let num = sys.weight(i, x)? * h.interp_eval(sys.apply_map(i, x)?)?;
            v.push(num / h.values()[j]);
        }
        tabulated.push(GridFunction::new(n, v)?);
    }
    WeightedSystem::new(sys.maps().to_vec(), Weights::PerMapGrid(tabulated), n)
}
