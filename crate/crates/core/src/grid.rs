//! Uniform grids on `[0,1]`: piecewise linear functions and node measures.
//!
//! The grid with `n` cells has nodes `x_j = j/n`, `j = 0..=n`. Functions are
//! stored by node values and evaluated by linear interpolation; measures are
//! nonnegative node weights summing to one. Pushing a point mass forward
//! splits it linearly between the two adjacent nodes, which is exactly the
//! adjoint of interpolation.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::expr::ExprAst;
use crate::scalar::Real;

/// Clamps `x` onto `[0,1]` when it lies within `eps_range` of the interval,
/// errors otherwise.
pub fn clamp_unit<F: Real>(x: F) -> Result<F> {
    let band = F::eps_range();
    if x < -band || x > F::one() + band {
        return Err(Error::OutOfInterval {
            x: x.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(x.max(F::zero()).min(F::one()))
}

/// Locates `x` in the `n`-cell grid: returns `(j, theta)` with
/// `j in 0..n`, `theta in [0,1]` and `x = (j + theta)/n` after clamping.
pub fn node_split<F: Real>(x: F, n: usize) -> Result<(usize, F)> {
    let x = clamp_unit(x)?;
    let t = x * F::of(n as f64);
    let mut j = t.floor().to_f64().unwrap_or(0.0) as usize;
    if j >= n {
        j = n - 1;
    }
    let theta = t - F::of(j as f64);
    Ok((j, theta.max(F::zero()).min(F::one())))
}

/// Splits a point mass at `x` onto the adjacent grid nodes. The returned
/// pairs `(node, mass)` sum to `mass` exactly; a zero share is omitted.
pub fn pushforward_node_split<F: Real>(x: F, mass: F, n: usize) -> Result<Vec<(usize, F)>> {
    let (j, theta) = node_split(x, n)?;
    let mut parts = Vec::with_capacity(2);
    let low = (F::one() - theta) * mass;
    let high = theta * mass;
    if theta < F::one() {
        parts.push((j, low));
    }
    if theta > F::zero() {
        parts.push((j + 1, high));
    }
    Ok(parts)
}

fn check_n(n: usize) -> Result<()> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::InvalidGrid(format!(
            "grid cell count must be even and at least 2, got {n}"
        )));
    }
    Ok(())
}

/// Piecewise linear function sampled at the nodes of a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction<F> {
    n: usize,
    values: Vec<F>,
}

impl<F: Real> GridFunction<F> {
    pub fn new(n: usize, values: Vec<F>) -> Result<Self> {
        check_n(n)?;
        if values.len() != n + 1 {
            return Err(Error::InvalidGrid(format!(
                "expected {} node values, got {}",
                n + 1,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid("non-finite node value".into()));
        }
        Ok(Self { n, values })
    }

    pub fn constant(n: usize, c: F) -> Result<Self> {
        Self::new(n, vec![c; n + 1])
    }

    pub fn from_fn(n: usize, f: impl Fn(F) -> F) -> Result<Self> {
        check_n(n)?;
        let values = (0..=n).map(|j| f(node_x(j, n))).collect();
        Self::new(n, values)
    }

    pub fn from_expr(n: usize, ast: &ExprAst) -> Result<Self> {
        check_n(n)?;
        let mut values = Vec::with_capacity(n + 1);
        for j in 0..=n {
            values.push(ast.evaluate(node_x(j, n))?);
        }
        Self::new(n, values)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    pub fn node_x(&self, j: usize) -> F {
        node_x(j, self.n)
    }

    /// Linear interpolation at `x`, exact at the nodes.
    pub fn interp_eval(&self, x: F) -> Result<F> {
        let (j, theta) = node_split(x, self.n)?;
        Ok((F::one() - theta) * self.values[j] + theta * self.values[j + 1])
    }

    pub fn min_value(&self) -> F {
        crate::scalar::min_entry(&self.values)
    }

    pub fn max_value(&self) -> F {
        crate::scalar::max_entry(&self.values)
    }

    pub fn sup_norm(&self) -> F {
        crate::scalar::sup_norm(&self.values)
    }

    /// Strict positivity of all node values (so interpolants stay positive).
    pub fn is_positive(&self) -> bool {
        self.values.iter().all(|&v| v > F::zero())
    }

    pub fn map(&self, f: impl Fn(F) -> F) -> Result<Self> {
        Self::new(self.n, self.values.iter().map(|&v| f(v)).collect())
    }
}

/// Position of node `j` on the `n`-cell grid.
pub fn node_x<F: Real>(j: usize, n: usize) -> F {
    F::of(j as f64 / n as f64)
}

/// Probability measure supported on the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMeasure<F> {
    n: usize,
    weights: Vec<F>,
}

impl<F: Real> GridMeasure<F> {
    /// Validates nonnegativity and total mass one (within `eps_mass`), then
    /// renormalizes so the stored weights sum to one exactly.
    pub fn new(n: usize, weights: Vec<F>) -> Result<Self> {
        check_n(n)?;
        if weights.len() != n + 1 {
            return Err(Error::InvalidMeasure(format!(
                "expected {} node weights, got {}",
                n + 1,
                weights.len()
            )));
        }
        let mut total = F::zero();
        let mut cleaned = Vec::with_capacity(weights.len());
        for &w in &weights {
            if !w.is_finite() || w < -F::eps_mass() {
                return Err(Error::InvalidMeasure(format!(
                    "negative or non-finite weight {}",
                    w.to_f64().unwrap_or(f64::NAN)
                )));
            }
            let w = w.max(F::zero());
            cleaned.push(w);
            total = total + w;
        }
        if (total - F::one()).abs() > F::eps_mass() {
            return Err(Error::InvalidMeasure(format!(
                "weights sum to {}, expected 1",
                total.to_f64().unwrap_or(f64::NAN)
            )));
        }
        for w in &mut cleaned {
            *w = *w / total;
        }
        Ok(Self {
            n,
            weights: cleaned,
        })
    }

    /// Normalizes an arbitrary nonnegative weight vector into a measure.
    pub fn from_unnormalized(n: usize, weights: Vec<F>) -> Result<Self> {
        check_n(n)?;
        if weights.len() != n + 1 {
            return Err(Error::InvalidMeasure(format!(
                "expected {} node weights, got {}",
                n + 1,
                weights.len()
            )));
        }
        let mut total = F::zero();
        for &w in &weights {
            if !w.is_finite() || w < -F::eps_mass() {
                return Err(Error::InvalidMeasure(format!(
                    "negative or non-finite weight {}",
                    w.to_f64().unwrap_or(f64::NAN)
                )));
            }
            total = total + w.max(F::zero());
        }
        if total <= F::zero() {
            return Err(Error::InvalidMeasure("total mass is zero".into()));
        }
        let weights = weights.into_iter().map(|w| w.max(F::zero()) / total).collect();
        Ok(Self { n, weights })
    }

    /// Equal weight on every node.
    pub fn uniform_nodes(n: usize) -> Result<Self> {
        check_n(n)?;
        let w = F::one() / F::of((n + 1) as f64);
        Ok(Self {
            n,
            weights: vec![w; n + 1],
        })
    }

    /// Node weights of Lebesgue measure under linear mass splitting:
    /// `1/(2n)` at the endpoints, `1/n` inside.
    pub fn lebesgue(n: usize) -> Result<Self> {
        check_n(n)?;
        let inner = F::one() / F::of(n as f64);
        let half = inner / F::of(2.0);
        let mut weights = vec![inner; n + 1];
        weights[0] = half;
        weights[n] = half;
        Self::new(n, weights)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weights(&self) -> &[F] {
        &self.weights
    }

    pub fn total(&self) -> F {
        self.weights.iter().fold(F::zero(), |a, &w| a + w)
    }

    /// Integral of a grid function against the measure (same grid required).
    pub fn integrate(&self, f: &GridFunction<F>) -> Result<F> {
        if f.n() != self.n {
            return Err(Error::GridMismatch {
                left: f.n(),
                right: self.n,
            });
        }
        Ok(self
            .weights
            .iter()
            .zip(f.values())
            .fold(F::zero(), |a, (&w, &v)| a + w * v))
    }

    /// Integral of an arbitrary function evaluated exactly at the nodes.
    pub fn integrate_with(&self, f: impl Fn(F) -> Result<F>) -> Result<F> {
        let mut acc = F::zero();
        for (j, &w) in self.weights.iter().enumerate() {
            acc = acc + w * f(node_x(j, self.n))?;
        }
        Ok(acc)
    }
}

/// L1 distance between two measures on the same grid.
pub fn l1_distance<F: Real>(a: &GridMeasure<F>, b: &GridMeasure<F>) -> Result<F> {
    if a.n() != b.n() {
        return Err(Error::GridMismatch {
            left: a.n(),
            right: b.n(),
        });
    }
    Ok(a.weights()
        .iter()
        .zip(b.weights())
        .fold(F::zero(), |acc, (&x, &y)| acc + (x - y).abs()))
}

/// Formats a scalar with 15 significant digits, deterministically.
pub fn fmt_sig<F: Real>(x: F) -> String {
    format!("{:.14e}", x.to_f64().unwrap_or(f64::NAN))
}

/// Writes `x,value` rows, one per node.
pub fn write_function_csv<F: Real, W: Write>(f: &GridFunction<F>, out: &mut W) -> io::Result<()> {
    writeln!(out, "x,value")?;
    for (j, &v) in f.values().iter().enumerate() {
        writeln!(out, "{},{}", fmt_sig(f.node_x(j)), fmt_sig(v))?;
    }
    Ok(())
}

/// Writes `x,weight` rows, one per node.
pub fn write_measure_csv<F: Real, W: Write>(m: &GridMeasure<F>, out: &mut W) -> io::Result<()> {
    writeln!(out, "x,weight")?;
    for (j, &w) in m.weights().iter().enumerate() {
        writeln!(out, "{},{}", fmt_sig(node_x::<F>(j, m.n())), fmt_sig(w))?;
    }
    Ok(())
}
