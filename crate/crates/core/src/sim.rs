//! Chaos-game simulation, Birkhoff averages, and empirical measures.
//!
//! For a Markov system (branch weights summing to one), iterating "pick
//! branch `i` with probability `u_i(x)`, move to `tau_i(x)`" samples the
//! stationary law of the weighted system, so time averages along a single
//! run approximate integrals against the stationary x marginal.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{clamp_unit, node_split, node_x, GridMeasure};
use crate::operator::{check_markov, WeightedSystem};
use crate::scalar::Real;
use crate::DEFAULT_GRID_N;

/// One chaos-game run. `states` holds the `steps + 1` visited points
/// (including the start), `symbols` the `steps` branch choices.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<F> {
    pub seed: u64,
    pub x0: F,
    pub states: Vec<F>,
    pub symbols: Vec<u8>,
    pub warnings: Vec<String>,
}

/// Default number of leading states to discard before averaging.
pub fn default_burn_in(steps: usize) -> usize {
    steps / 100
}

/// Grid estimate of the Lipschitz constant of branch `i`: the largest
/// slope between adjacent nodes.
fn lipschitz_estimate<F: Real>(sys: &WeightedSystem<F>, i: usize, n: usize) -> Result<F> {
    let mut worst = F::zero();
    let mut prev = sys.apply_map(i, node_x(0, n))?;
    for j in 1..=n {
        let next = sys.apply_map(i, node_x(j, n))?;
        worst = worst.max((next - prev).abs() * F::of(n as f64));
        prev = next;
    }
    Ok(worst)
}

/// Runs the chaos game for `steps` steps from `x0` with a deterministic
/// seeded generator.
///
/// The system must be Markov within `1e-8` at the grid nodes (normalize it
/// first otherwise). Convergence of time averages to the stationary law
/// additionally wants strictly positive weights and contraction on average;
/// runs that violate the grid versions of those conditions carry warnings
/// rather than failing.
pub fn chaos_game<F: Real>(
    sys: &WeightedSystem<F>,
    x0: F,
    steps: usize,
    seed: u64,
) -> Result<Trajectory<F>> {
    if steps == 0 {
        return Err(Error::InvalidInput("a trajectory needs at least one step".into()));
    }
    let n = sys.natural_grid().unwrap_or(DEFAULT_GRID_N);
    let defect = check_markov(sys, n)?;
    if defect > F::eps_markov() {
        return Err(Error::InvalidSystem(format!(
            "branch weights sum to 1 only within {:.3e}; normalize the system first",
            defect.to_f64().unwrap_or(f64::NAN)
        )));
    }

    let mut warnings = Vec::new();
    let mut min_weight = F::infinity();
    for i in 0..sys.branch_count() {
        for j in 0..=n {
            min_weight = min_weight.min(sys.weight(i, node_x(j, n))?);
        }
    }
    if min_weight < F::of(1e-6) {
        warnings.push(format!(
            "a branch weight drops to {:.3e} on the grid; the chain may mix poorly or never take that branch",
            min_weight.to_f64().unwrap_or(f64::NAN)
        ));
    }
    for i in 0..sys.branch_count() {
        let lip = lipschitz_estimate(sys, i, n)?;
        if lip >= F::one() {
            warnings.push(format!(
                "branch {i} has grid Lipschitz estimate {:.3}; without average contraction the time averages may not settle",
                lip.to_f64().unwrap_or(f64::NAN)
            ));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0 = clamp_unit(x0)?;
    let mut states = Vec::with_capacity(steps + 1);
    let mut symbols = Vec::with_capacity(steps);
    let mut x = x0;
    states.push(x);
    for _ in 0..steps {
        let mut total = F::zero();
        let mut weights = Vec::with_capacity(sys.branch_count());
        for i in 0..sys.branch_count() {
            let w = sys.weight(i, x)?;
            if w < F::zero() {
                return Err(Error::InvalidSystem(format!(
                    "negative branch weight encountered at x = {}",
                    x.to_f64().unwrap_or(f64::NAN)
                )));
            }
            weights.push(w);
            total = total + w;
        }
        if total <= F::zero() {
            return Err(Error::InvalidSystem(format!(
                "all branch weights vanish at x = {}",
                x.to_f64().unwrap_or(f64::NAN)
            )));
        }
        let draw = F::of(rng.gen::<f64>()) * total;
        let mut acc = F::zero();
        let mut pick = sys.branch_count() - 1;
        for (i, &w) in weights.iter().enumerate() {
            acc = acc + w;
            if draw < acc {
                pick = i;
                break;
            }
        }
        x = sys.apply_map(pick, x)?;
        states.push(x);
        symbols.push(pick as u8);
    }
    Ok(Trajectory {
        seed,
        x0,
        states,
        symbols,
        warnings,
    })
}

/// Time average of `f` over the trajectory after discarding the first
/// `burn_in` states.
pub fn birkhoff_average<F: Real>(
    traj: &Trajectory<F>,
    f: impl Fn(F) -> Result<F>,
    burn_in: usize,
) -> Result<F> {
    if burn_in >= traj.states.len() {
        return Err(Error::InvalidInput(format!(
            "burn-in {burn_in} discards the whole trajectory of {} states",
            traj.states.len()
        )));
    }
    let tail = &traj.states[burn_in..];
    let mut acc = F::zero();
    for &x in tail {
        acc = acc + f(x)?;
    }
    Ok(acc / F::of(tail.len() as f64))
}

/// Probability that a chain started at `x` reads exactly `digits`
/// (the mass of that cylinder over `x`): the product of the weight of each
/// chosen branch along the induced orbit, weight taken before moving.
pub fn cylinder_probability<F: Real>(
    sys: &WeightedSystem<F>,
    x: F,
    digits: &[u8],
) -> Result<F> {
    sys.path_probability(x, digits)
}

/// Histogram of the visited states on `bins` cells, with each state mass
/// split linearly between its two enclosing nodes.
pub fn empirical_measure<F: Real>(
    traj: &Trajectory<F>,
    bins: usize,
    burn_in: usize,
) -> Result<GridMeasure<F>> {
    if burn_in >= traj.states.len() {
        return Err(Error::InvalidInput(format!(
            "burn-in {burn_in} discards the whole trajectory of {} states",
            traj.states.len()
        )));
    }
    let mut weights = vec![F::zero(); bins + 1];
    for &x in &traj.states[burn_in..] {
        let (j, theta) = node_split(x, bins)?;
        weights[j] = weights[j] + (F::one() - theta);
        if theta > F::zero() {
            weights[j + 1] = weights[j + 1] + theta;
        }
    }
    GridMeasure::from_unnormalized(bins, weights)
}

/// Empirical frequency of each branch symbol along the run.
pub fn symbol_frequencies<F: Real>(traj: &Trajectory<F>, branches: usize) -> Vec<F> {
    let mut counts = vec![0usize; branches];
    for &s in &traj.symbols {
        if (s as usize) < branches {
            counts[s as usize] += 1;
        }
    }
    let total = F::of(traj.symbols.len().max(1) as f64);
    counts.iter().map(|&c| F::of(c as f64) / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::grid::{l1_distance, GridFunction};
    use crate::operator::{spectral_triple, Weights};

    fn halves(n: usize) -> WeightedSystem<f64> {
        WeightedSystem::new(
            vec![parse("x/2").unwrap(), parse("(x + 1)/2").unwrap()],
            Weights::PerMapExpr(vec![parse("0.5").unwrap(), parse("0.5").unwrap()]),
            n,
        )
        .unwrap()
    }

    #[test]
    fn same_seed_reproduces_the_run_exactly() {
        let sys = halves(64);
        let a = chaos_game(&sys, 0.3, 5000, 7).unwrap();
        let b = chaos_game(&sys, 0.3, 5000, 7).unwrap();
        assert_eq!(a, b);
        let c = chaos_game(&sys, 0.3, 5000, 8).unwrap();
        assert_ne!(a.symbols, c.symbols);
    }

    #[test]
    fn non_markov_systems_are_rejected() {
        let sys = WeightedSystem::<f64>::new(
            vec![parse("x/2").unwrap(), parse("(x + 1)/2").unwrap()],
            Weights::PerMapExpr(vec![parse("0.7").unwrap(), parse("0.7").unwrap()]),
            64,
        )
        .unwrap();
        assert!(matches!(
            chaos_game(&sys, 0.5, 10, 0),
            Err(Error::InvalidSystem(_))
        ));
    }

    #[test]
    fn birkhoff_averages_match_the_stationary_moments() {
        let n = 256;
        let sys = halves(n);
        let traj = chaos_game(&sys, 0.3, 300_000, 12345).unwrap();
        assert!(traj.warnings.is_empty(), "warnings: {:?}", traj.warnings);
        let burn = default_burn_in(300_000);
        // stationary law of the fair-coin halves system is Lebesgue; compare
        // against the discrete dual fixed point as the reference
        let triple = spectral_triple(&sys, n, 1e-12, 10_000).unwrap();
        let xs = GridFunction::from_fn(n, |x: f64| x).unwrap();
        let xsq = GridFunction::from_fn(n, |x: f64| x * x).unwrap();
        let m1 = triple.nu.integrate(&xs).unwrap();
        let m2 = triple.nu.integrate(&xsq).unwrap();
        assert!((m1 - 0.5).abs() <= 1e-9);
        assert!((m2 - 1.0 / 3.0).abs() <= 1e-4);
        let a1 = birkhoff_average(&traj, Ok, burn).unwrap();
        let a2 = birkhoff_average(&traj, |x| Ok(x * x), burn).unwrap();
        assert!((a1 - m1).abs() <= 5e-3, "first moment off: {a1} vs {m1}");
        assert!((a2 - m2).abs() <= 5e-3, "second moment off: {a2} vs {m2}");
        let freqs = symbol_frequencies(&traj, 2);
        assert!((freqs[0] - 0.5).abs() <= 5e-3);
    }

    #[test]
    fn empirical_histogram_approaches_the_stationary_density() {
        let sys = halves(64);
        let traj = chaos_game(&sys, 0.3, 300_000, 99).unwrap();
        let hist = empirical_measure(&traj, 64, default_burn_in(300_000)).unwrap();
        let uniform = GridMeasure::<f64>::lebesgue(64).unwrap();
        let dist = l1_distance(&hist, &uniform).unwrap();
        assert!(dist <= 0.03, "l1 distance {dist}");
    }

    #[test]
    fn cylinder_masses_are_additive_and_sum_to_one() {
        let sys = WeightedSystem::<f64>::new(
            vec![parse("x/2").unwrap(), parse("(x + 1)/2").unwrap()],
            Weights::PerMapExpr(vec![
                parse("0.5 + 0.2*sin(2*pi*x)").unwrap(),
                parse("0.5 - 0.2*sin(2*pi*x)").unwrap(),
            ]),
            256,
        )
        .unwrap();
        for x in [0.0, 0.3, 0.71] {
            for depth in 1..=8usize {
                let mut total = 0.0;
                for code in 0..(1usize << depth) {
                    let digits: Vec<u8> =
                        (0..depth).map(|t| ((code >> t) & 1) as u8).collect();
                    total += cylinder_probability(&sys, x, &digits).unwrap();
                }
                assert!(
                    (total - 1.0).abs() <= 1e-12,
                    "depth {depth} at x = {x}: total {total}"
                );
            }
        }
        // splitting a cylinder over its last digit recovers the parent mass
        let parent = cylinder_probability(&sys, 0.3, &[1, 0]).unwrap();
        let left = cylinder_probability(&sys, 0.3, &[1, 0, 0]).unwrap();
        let right = cylinder_probability(&sys, 0.3, &[1, 0, 1]).unwrap();
        assert!((left + right - parent).abs() <= 1e-15);
    }

    #[test]
    fn expansive_or_degenerate_branches_raise_warnings() {
        // logistic branch has slope up to 4 on the grid
        let expansive = WeightedSystem::<f64>::new(
            vec![parse("4*x*(1 - x)").unwrap(), parse("x/2").unwrap()],
            Weights::PerMapExpr(vec![parse("0.5").unwrap(), parse("0.5").unwrap()]),
            64,
        )
        .unwrap();
        let traj = chaos_game(&expansive, 0.2, 100, 1).unwrap();
        assert!(traj.warnings.iter().any(|w| w.contains("Lipschitz")));

        // weight x vanishes at the left endpoint
        let degenerate = WeightedSystem::<f64>::new(
            vec![parse("x/2").unwrap(), parse("(x + 1)/2").unwrap()],
            Weights::PerMapExpr(vec![parse("x").unwrap(), parse("1 - x").unwrap()]),
            64,
        )
        .unwrap();
        let traj = chaos_game(&degenerate, 0.5, 100, 1).unwrap();
        assert!(traj.warnings.iter().any(|w| w.contains("weight")));
    }

    #[test]
    fn burn_in_larger_than_the_run_is_rejected() {
        let sys = halves(64);
        let traj = chaos_game(&sys, 0.3, 10, 0).unwrap();
        assert!(birkhoff_average(&traj, Ok, 11).is_err());
        assert!(empirical_measure(&traj, 64, 11).is_err());
    }

    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        /// Depth-k cylinder masses partition the total: for any tilted
        /// stochastic weight pair and any start point they sum to one.
        #[test]
        fn cylinder_masses_partition_unity(
            p in 0.05f64..0.95,
            x in 0.0f64..=1.0,
            depth in 1usize..=4,
        ) {
            let sys = WeightedSystem::<f64>::new(
                vec![parse("x/2").unwrap(), parse("(x + 1)/2").unwrap()],
                Weights::PerMapExpr(vec![
                    crate::expr::ExprAst::Const(p),
                    crate::expr::ExprAst::Const(1.0 - p),
                ]),
                64,
            )
            .unwrap();
            let mut total = 0.0;
            for code in 0..(1u32 << depth) {
                let digits: Vec<u8> =
                    (0..depth).map(|b| ((code >> b) & 1) as u8).collect();
                total += cylinder_probability(&sys, x, &digits).unwrap();
            }
            prop_assert!(
                (total - 1.0).abs() <= 1e-12,
                "depth-{depth} cylinders sum to {total}"
            );
        }

        /// Every visited state of a chaos game stays inside the interval
        /// and the recorded symbols stay inside the alphabet.
        #[test]
        fn trajectories_stay_in_the_unit_interval(
            seed in any::<u64>(),
            x0 in 0.0f64..=1.0,
        ) {
            let sys = halves(64);
            let traj = chaos_game(&sys, x0, 200, seed).unwrap();
            prop_assert!(traj.states.iter().all(|&x| (0.0..=1.0).contains(&x)));
            prop_assert!(traj.symbols.iter().all(|&s| s < 2));
        }
    }
}
