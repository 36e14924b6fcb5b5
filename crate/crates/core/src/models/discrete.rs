//! A fully enumerable three-state system with an intractable-by-contract
//! proposal, used to check the factory and kernels against exact answers.
//!
//! States are encoded as the single coordinate `0`, `1` or `2`.

use crate::bernoulli_factory::{make_normalizer_coin, CoinOracle, TwoCoinInputs, BOUND_TOLERANCE};
use crate::distributions::RngStream;
use crate::error::{Error, Result};
use crate::kernels::TargetDensity;
use crate::proposals::{IntractableProposal, TractableProposal};
use crate::real::Real;

pub const STATES: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSystem<T> {
    pi: [T; STATES],
    /// `qtilde[x][y] = q̃(y | x)`.
    qtilde: [[T; STATES]; STATES],
    bound: [T; STATES],
}

fn index_of<T: Real>(x: &[T]) -> Option<usize> {
    let v = x[0];
    (0..STATES).find(|&i| v == T::of(i as f64))
}

impl<T: Real> DiscreteSystem<T> {
    /// `pi` may be unnormalized. Each bound must satisfy
    /// `bound[x] >= STATES * max_y q̃(y|x)` so the uniform-envelope coin is valid.
    pub fn new(pi: [f64; STATES], qtilde: [[f64; STATES]; STATES], bound: [f64; STATES]) -> Result<Self> {
        for x in 0..STATES {
            let max_q = qtilde[x].iter().copied().fold(0.0, f64::max);
            if !(pi[x] > 0.0) || qtilde[x].iter().any(|&q| !(q > 0.0)) {
                return Err(Error::Domain("target and q̃ entries must be positive".into()));
            }
            if bound[x] * (1.0 + BOUND_TOLERANCE) < STATES as f64 * max_q {
                return Err(Error::Domain(format!(
                    "bound {} for state {x} is below {}·max q̃ = {}",
                    bound[x],
                    STATES,
                    STATES as f64 * max_q
                )));
            }
        }
        Ok(Self {
            pi: pi.map(T::of),
            qtilde: qtilde.map(|row| row.map(T::of)),
            bound: bound.map(T::of),
        })
    }

    /// `π = (0.2, 0.3, 0.5)` with a mildly uneven `q̃` and tight bounds.
    pub fn reference() -> Self {
        let qt = [[0.5, 1.0, 1.5], [0.8, 0.2, 0.6], [0.3, 0.9, 0.4]];
        Self::new([0.2, 0.3, 0.5], qt, [4.5, 2.4, 2.7]).expect("valid constants")
    }

    /// Same target, strongly uneven `q̃`, one loose bound.
    pub fn skewed() -> Self {
        let qt = [[0.1, 2.0, 0.4], [1.0, 0.05, 0.3], [0.7, 0.2, 0.05]];
        Self::new([0.2, 0.3, 0.5], qt, [6.0, 4.0, 2.1]).expect("valid constants")
    }

    pub fn normalized_pi(&self) -> Vec<f64> {
        let total: f64 = self.pi.iter().map(|p| p.to_f64_lossy()).sum();
        self.pi.iter().map(|p| p.to_f64_lossy() / total).collect()
    }

    pub fn qtilde_table(&self) -> Vec<Vec<f64>> {
        self.qtilde
            .iter()
            .map(|row| row.iter().map(|q| q.to_f64_lossy()).collect())
            .collect()
    }

    pub fn bounds(&self) -> Vec<f64> {
        self.bound.iter().map(|b| b.to_f64_lossy()).collect()
    }

    /// `r(x)` by enumeration; only for oracles and reports.
    pub fn exact_normalizer(&self, x: usize) -> f64 {
        self.qtilde[x].iter().map(|q| q.to_f64_lossy()).sum()
    }

    /// Barker acceptance computed in closed form.
    pub fn exact_barker(&self, x: usize, y: usize) -> f64 {
        let pi = self.normalized_pi();
        let qt = self.qtilde_table();
        let num = pi[y] * qt[y][x] / self.exact_normalizer(y);
        let den = pi[x] * qt[x][y] / self.exact_normalizer(x);
        num / (num + den)
    }

    /// `(c_x, c_y, p_x, p_y)` for the move `x -> y`, evaluated exactly.
    pub fn factory_terms(&self, x: usize, y: usize) -> (f64, f64, f64, f64) {
        let f = |v: T| v.to_f64_lossy();
        let cx = f(self.pi[x]) * f(self.qtilde[x][y]) * f(self.bound[y]);
        let cy = f(self.pi[y]) * f(self.qtilde[y][x]) * f(self.bound[x]);
        let px = self.exact_normalizer(y) / f(self.bound[y]);
        let py = self.exact_normalizer(x) / f(self.bound[x]);
        (cx, cy, px, py)
    }

    /// Factory inputs for the move `x -> y`, built the way the kernel does.
    #[allow(clippy::type_complexity)]
    pub fn two_coin_inputs(
        &self,
        x: usize,
        y: usize,
    ) -> Result<TwoCoinInputs<T, Box<dyn CoinOracle + '_>, Box<dyn CoinOracle + '_>>> {
        let xs = [T::of(x as f64)];
        let ys = [T::of(y as f64)];
        let log_cx = self.pi[x].ln() + self.log_qtilde(&ys, &xs) + self.log_bound(&ys);
        let log_cy = self.pi[y].ln() + self.log_qtilde(&xs, &ys) + self.log_bound(&xs);
        TwoCoinInputs::new(log_cx, log_cy, self.coin_for(y), self.coin_for(x))
    }

    fn coin_for(&self, x: usize) -> Box<dyn CoinOracle + '_> {
        let log_f = -T::of(STATES as f64).ln();
        let coin = make_normalizer_coin(
            move |m: &[T]| match index_of(m) {
                Some(j) => self.qtilde[x][j].ln(),
                None => T::neg_infinity(),
            },
            self.bound[x],
            |rng: &mut RngStream| vec![T::of((rng.uniform::<f64>() * STATES as f64).floor())],
            move |_: &[T]| log_f,
        )
        .expect("bounds validated at construction");
        Box::new(coin)
    }

    fn max_row(&self, x: usize) -> T {
        self.qtilde[x].iter().copied().fold(T::zero(), T::max)
    }

    /// View with the normalized proposal density, for the exact kernels.
    pub fn tractable(&self) -> DiscreteTractable<'_, T> {
        DiscreteTractable(self)
    }
}

impl<T: Real> TargetDensity<T> for DiscreteSystem<T> {
    fn dim(&self) -> usize {
        1
    }

    fn log_density(&self, x: &[T]) -> T {
        index_of(x).map_or(T::neg_infinity(), |i| self.pi[i].ln())
    }
}

impl<T: Real> IntractableProposal<T> for DiscreteSystem<T> {
    type Coin<'a> = Box<dyn CoinOracle + 'a>;

    /// Rejection from the uniform envelope; never touches `r(x)`.
    fn sample(&self, x: &[T], rng: &mut RngStream) -> Result<Vec<T>> {
        let from = index_of(x).ok_or_else(|| Error::invalid_state("not a discrete state"))?;
        let cap = self.max_row(from);
        loop {
            let m = ((rng.uniform::<f64>() * STATES as f64) as usize).min(STATES - 1);
            if rng.coin(self.qtilde[from][m] / cap) {
                return Ok(vec![T::of(m as f64)]);
            }
        }
    }

    fn log_qtilde(&self, to: &[T], from: &[T]) -> T {
        match (index_of(from), index_of(to)) {
            (Some(i), Some(j)) => self.qtilde[i][j].ln(),
            _ => T::neg_infinity(),
        }
    }

    fn log_bound(&self, x: &[T]) -> T {
        index_of(x).map_or(T::zero(), |i| self.bound[i].ln())
    }

    fn normalizer_coin<'a>(&'a self, x: &'a [T]) -> Self::Coin<'a> {
        self.coin_for(index_of(x).expect("coin requested for a valid state"))
    }
}

pub struct DiscreteTractable<'a, T>(&'a DiscreteSystem<T>);

impl<T: Real> TractableProposal<T> for DiscreteTractable<'_, T> {
    fn sample(&self, x: &[T], rng: &mut RngStream) -> Result<Vec<T>> {
        self.0.sample(x, rng)
    }

    fn log_density(&self, to: &[T], from: &[T]) -> T {
        match index_of(from) {
            Some(i) => self.0.log_qtilde(to, from) - T::of(self.0.exact_normalizer(i)).ln(),
            None => T::neg_infinity(),
        }
    }

    fn is_symmetric(&self) -> bool {
        false
    }
}
