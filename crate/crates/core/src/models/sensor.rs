//! Sensor network localization: six sensors in the plane, four at unknown
//! positions, observed through noisy pairwise distances that are only seen
//! with a distance-dependent probability.

use std::io::{BufRead, Write};

use crate::distributions::RngStream;
use crate::error::{Error, Result};
use crate::bernoulli_factory::LoopAccumulator;
use crate::kernels::{Kernel, KernelKind, RamAuxKernel, StepInfo, TargetDensity, TwoCoinKernel};
use crate::proposals::{GaussianWalk, RamProposal};
use crate::real::Real;

pub const SENSORS: usize = 6;
pub const UNKNOWN: usize = 4;
pub const OBS_SCALE: f64 = 0.3;
pub const NOISE_SD: f64 = 0.02;
pub const PRIOR_SD: f64 = 10.0;

/// Shipped ground truth: unknown sensors first, the two anchors last.
pub const REFERENCE_LOCATIONS: [[f64; 2]; SENSORS] = [
    [0.57, 0.91],
    [0.10, 0.37],
    [0.26, 0.14],
    [0.85, 0.04],
    [0.50, 0.30],
    [0.30, 0.70],
];

#[derive(Debug, Clone, PartialEq)]
pub struct SensorData<T> {
    /// Anchor positions (sensors 5 and 6).
    pub known_locations: [[T; 2]; SENSORS - UNKNOWN],
    /// Symmetric observation indicators with zero diagonal.
    pub w: [[bool; SENSORS]; SENSORS],
    /// Observed distances, present exactly where `w` is set.
    pub y: [[Option<T>; SENSORS]; SENSORS],
    pub obs_scale: T,
    pub noise_sd: T,
    pub prior_sd: T,
}

fn dist2<T: Real>(a: &[T; 2], b: &[T; 2]) -> T {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

/// `log P(w_ij = 1) = -d² / (2 · scale²)`.
pub fn log_observation_rate<T: Real>(d2: T, obs_scale: T) -> T {
    -d2 / (T::of(2.0) * obs_scale * obs_scale)
}

/// Simulates indicators and distances for the six true locations.
pub fn simulate_sensor_data<T: Real>(
    true_locations: &[[T; 2]; SENSORS],
    rng: &mut RngStream,
) -> SensorData<T> {
    simulate_with_noise(true_locations, T::of(NOISE_SD), rng)
}

pub fn simulate_with_noise<T: Real>(
    true_locations: &[[T; 2]; SENSORS],
    noise_sd: T,
    rng: &mut RngStream,
) -> SensorData<T> {
    let obs_scale = T::of(OBS_SCALE);
    let mut w = [[false; SENSORS]; SENSORS];
    let mut y = [[None; SENSORS]; SENSORS];
    for i in 0..SENSORS {
        for j in i + 1..SENSORS {
            let d2 = dist2(&true_locations[i], &true_locations[j]);
            let rate = log_observation_rate(d2, obs_scale).exp();
            if rng.coin(rate) {
                let d = d2.sqrt() + noise_sd * rng.standard_normal::<T>();
                w[i][j] = true;
                w[j][i] = true;
                y[i][j] = Some(d);
                y[j][i] = Some(d);
            }
        }
    }
    SensorData {
        known_locations: [true_locations[UNKNOWN], true_locations[UNKNOWN + 1]],
        w,
        y,
        obs_scale,
        noise_sd,
        prior_sd: T::of(PRIOR_SD),
    }
}

impl<T: Real> SensorData<T> {
    pub fn validate(&self) -> Result<()> {
        for i in 0..SENSORS {
            if self.w[i][i] {
                return Err(Error::Domain(format!("sensor {} observes itself", i + 1)));
            }
            for j in 0..SENSORS {
                if self.w[i][j] != self.w[j][i] || self.y[i][j] != self.y[j][i] {
                    return Err(Error::Domain(format!("pair ({}, {}) is not symmetric", i + 1, j + 1)));
                }
                if self.w[i][j] != self.y[i][j].is_some() {
                    return Err(Error::Domain(format!(
                        "pair ({}, {}) has a distance iff it is observed",
                        i + 1,
                        j + 1
                    )));
                }
                if self.y[i][j].is_some_and(|d| d < T::zero()) {
                    return Err(Error::Domain(format!("negative distance for pair ({}, {})", i + 1, j + 1)));
                }
            }
        }
        Ok(())
    }

    pub fn observed_pairs(&self) -> usize {
        (0..SENSORS)
            .map(|i| (i + 1..SENSORS).filter(|&j| self.w[i][j]).count())
            .sum()
    }

    /// CSV with header `i,j,w,y`; 1-based sensor ids, `i < j`, empty `y` when unobserved.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "i,j,w,y")?;
        for i in 0..SENSORS {
            for j in i + 1..SENSORS {
                match self.y[i][j] {
                    Some(d) => writeln!(out, "{},{},1,{}", i + 1, j + 1, d.to_f64_lossy())?,
                    None => writeln!(out, "{},{},0,", i + 1, j + 1)?,
                }
            }
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R, known_locations: [[T; 2]; SENSORS - UNKNOWN]) -> Result<Self> {
        let mut data = SensorData {
            known_locations,
            w: [[false; SENSORS]; SENSORS],
            y: [[None; SENSORS]; SENSORS],
            obs_scale: T::of(OBS_SCALE),
            noise_sd: T::of(NOISE_SD),
            prior_sd: T::of(PRIOR_SD),
        };
        let bad = |line: usize, what: &str| Error::Domain(format!("sensor CSV line {line}: {what}"));
        for (n, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::Domain(e.to_string()))?;
            if n == 0 || line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 4 {
                return Err(bad(n + 1, "expected 4 columns"));
            }
            let i: usize = cols[0].parse().map_err(|_| bad(n + 1, "bad i"))?;
            let j: usize = cols[1].parse().map_err(|_| bad(n + 1, "bad j"))?;
            if !(1..=SENSORS).contains(&i) || !(1..=SENSORS).contains(&j) || i == j {
                return Err(bad(n + 1, "sensor id out of range"));
            }
            let (i, j) = (i - 1, j - 1);
            let observed = match cols[2] {
                "1" => true,
                "0" => false,
                _ => return Err(bad(n + 1, "w must be 0 or 1")),
            };
            let d = if observed {
                let v: f64 = cols[3].parse().map_err(|_| bad(n + 1, "bad y"))?;
                Some(T::of(v))
            } else {
                None
            };
            data.w[i][j] = observed;
            data.w[j][i] = observed;
            data.y[i][j] = d;
            data.y[j][i] = d;
        }
        data.validate()?;
        Ok(data)
    }
}

/// Posterior over the eight unknown coordinates `(x1, x2, x3, x4)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorModel<T> {
    data: SensorData<T>,
}

impl<T: Real> SensorModel<T> {
    pub fn new(data: SensorData<T>) -> Result<Self> {
        data.validate()?;
        Ok(Self { data })
    }

    pub fn data(&self) -> &SensorData<T> {
        &self.data
    }

    fn location(&self, x: &[T], k: usize) -> [T; 2] {
        if k < UNKNOWN {
            [x[2 * k], x[2 * k + 1]]
        } else {
            self.data.known_locations[k - UNKNOWN]
        }
    }

    fn pair_log_likelihood(&self, a: &[T; 2], b: &[T; 2], i: usize, j: usize) -> T {
        let d2 = dist2(a, b);
        let log_rate = log_observation_rate(d2, self.data.obs_scale);
        match self.data.y[i][j] {
            Some(obs) => {
                let sd = self.data.noise_sd;
                let r = (obs - d2.sqrt()) / sd;
                log_rate - T::of(0.5) * r * r - sd.ln() - T::of(0.5) * T::TAU().ln()
            }
            // log(1 - exp(log_rate)); -inf for coincident sensors.
            None => (-log_rate.exp_m1()).ln(),
        }
    }

    fn log_prior(&self, p: &[T; 2]) -> T {
        let s2 = self.data.prior_sd * self.data.prior_sd;
        -(p[0] * p[0] + p[1] * p[1]) / (T::of(2.0) * s2)
    }

    /// Log posterior (up to a constant) at the eight coordinates.
    pub fn sensor_log_posterior(&self, x: &[T]) -> T {
        let locs: Vec<[T; 2]> = (0..SENSORS).map(|k| self.location(x, k)).collect();
        let mut total = T::zero();
        for i in 0..SENSORS {
            for j in i + 1..SENSORS {
                total = total + self.pair_log_likelihood(&locs[i], &locs[j], i, j);
            }
        }
        total + locs[..UNKNOWN].iter().map(|p| self.log_prior(p)).sum::<T>()
    }

    /// Terms of the log posterior that involve unknown sensor `k`.
    pub fn sensor_log_conditional(&self, x: &[T], k: usize) -> T {
        let pk = self.location(x, k);
        let mut total = self.log_prior(&pk);
        for j in 0..SENSORS {
            if j != k {
                let (a, b) = if k < j { (k, j) } else { (j, k) };
                total = total + self.pair_log_likelihood(&pk, &self.location(x, j), a, b);
            }
        }
        total
    }

    /// 2-d conditional target for one unknown sensor with the others fixed.
    pub fn conditional<'a>(&'a self, state: &'a [T], k: usize) -> SensorConditional<'a, T> {
        SensorConditional {
            model: self,
            state,
            k,
        }
    }
}

impl<T: Real> TargetDensity<T> for SensorModel<T> {
    fn dim(&self) -> usize {
        2 * UNKNOWN
    }

    fn log_density(&self, x: &[T]) -> T {
        self.sensor_log_posterior(x)
    }
}

pub struct SensorConditional<'a, T> {
    model: &'a SensorModel<T>,
    state: &'a [T],
    k: usize,
}

impl<T: Real> TargetDensity<T> for SensorConditional<'_, T> {
    fn dim(&self) -> usize {
        2
    }

    fn log_density(&self, p: &[T]) -> T {
        let mut x = self.state.to_vec();
        x[2 * self.k] = p[0];
        x[2 * self.k + 1] = p[1];
        self.model.sensor_log_conditional(&x, self.k)
    }
}

/// How each sensor's location is updated inside a Gibbs sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SensorUpdate {
    /// RAM proposal accepted through the two-coin Barker factory.
    TwoCoin,
    /// Auxiliary-variable RAM with a fresh `z` drawn for every update.
    Auxiliary,
}

/// Metropolis-within-Gibbs over the four unknown sensors, one RAM update
/// per sensor and sweep, with inner walk `N(·, variance·I₂)`.
///
/// Sensor `k` uses `ε_k = epsilon_fraction · π̃_k(init)` for its conditional.
pub struct SensorGibbsKernel<'m, T> {
    model: &'m SensorModel<T>,
    walk: GaussianWalk<T>,
    epsilon: [T; UNKNOWN],
    update: SensorUpdate,
    x: Vec<T>,
    loops: [LoopAccumulator; UNKNOWN],
    accepted: [u64; UNKNOWN],
}

impl<'m, T: Real> SensorGibbsKernel<'m, T> {
    pub fn new(model: &'m SensorModel<T>, update: SensorUpdate, variance: T, epsilon_fraction: T, init: Vec<T>) -> Result<Self> {
        if init.len() != 2 * UNKNOWN {
            return Err(Error::invalid_state(format!("expected {} coordinates, got {}", 2 * UNKNOWN, init.len())));
        }
        if model.log_density(&init) == T::neg_infinity() {
            return Err(Error::invalid_state("initial sensor configuration has zero posterior density"));
        }
        let epsilon = std::array::from_fn(|k| (epsilon_fraction.ln() + model.sensor_log_conditional(&init, k)).exp());
        Ok(Self {
            model,
            walk: GaussianWalk::isotropic(2, variance)?,
            epsilon,
            update,
            x: init,
            loops: [LoopAccumulator::default(); UNKNOWN],
            accepted: [0; UNKNOWN],
        })
    }

    /// Per-sensor loop statistics: two-coin loops, or forced-down loops
    /// to `x'` for the auxiliary sampler.
    pub fn sensor_loops(&self) -> &[LoopAccumulator; UNKNOWN] {
        &self.loops
    }

    pub fn sensor_accepted(&self) -> &[u64; UNKNOWN] {
        &self.accepted
    }

    fn update_sensor(&mut self, k: usize, rng: &mut RngStream) -> Result<(bool, u64)> {
        let snapshot = self.x.clone();
        let cond = self.model.conditional(&snapshot, k);
        let ram = RamProposal::new(&cond, self.walk.clone(), self.epsilon[k])?;
        let pk = vec![snapshot[2 * k], snapshot[2 * k + 1]];
        let (info, next) = match self.update {
            SensorUpdate::TwoCoin => {
                let mut kern = TwoCoinKernel::new(&cond, &ram, pk)?;
                let info = kern.step(rng)?;
                (info, kern.state().to_vec())
            }
            SensorUpdate::Auxiliary => {
                let mut kern = RamAuxKernel::new(ram, pk, rng)?;
                let info = kern.step(rng)?;
                let down = kern.proposal_loops().0.total_loops;
                let info = StepInfo {
                    loops: Some(down),
                    ..info
                };
                (info, kern.state().to_vec())
            }
        };
        self.x[2 * k] = next[0];
        self.x[2 * k + 1] = next[1];
        Ok((info.accepted, info.loops.unwrap_or(0)))
    }
}

impl<T: Real> Kernel<T> for SensorGibbsKernel<'_, T> {
    fn kind(&self) -> KernelKind {
        match self.update {
            SensorUpdate::TwoCoin => KernelKind::BarkerTwoCoin,
            SensorUpdate::Auxiliary => KernelKind::RamAuxiliary,
        }
    }

    fn state(&self) -> &[T] {
        &self.x
    }

    /// One sweep; reports whether any sensor moved and the summed loops.
    fn step(&mut self, rng: &mut RngStream) -> Result<StepInfo> {
        let mut any = false;
        let mut total = 0;
        for k in 0..UNKNOWN {
            let (acc, loops) = self.update_sensor(k, rng)?;
            self.loops[k].record(loops);
            self.accepted[k] += acc as u64;
            any |= acc;
            total += loops;
        }
        Ok(StepInfo {
            accepted: any,
            loops: Some(total),
        })
    }
}

pub fn reference_locations<T: Real>() -> [[T; 2]; SENSORS] {
    REFERENCE_LOCATIONS.map(|p| p.map(T::of))
}
