//! Accept-reject chain drivers.
//!
//! Four kernels share the [`Kernel`] interface: Metropolis-Hastings and
//! Barker with an evaluable proposal density, Barker through the two-coin
//! factory for intractable proposals, and the auxiliary-variable
//! repelling-attracting sampler.

use std::time::Instant;

use crate::bernoulli_factory::{two_coin, LoopAccumulator, TwoCoinInputs, DEFAULT_MAX_LOOPS};
use crate::distributions::RngStream;
use crate::error::{Error, Result};
use crate::proposals::{IntractableProposal, RamProposal, TractableProposal};
use crate::real::{log_add_exp, Real};

/// Unnormalized log target; `-inf` exactly off the support.
pub trait TargetDensity<T: Real> {
    fn dim(&self) -> usize;
    fn log_density(&self, x: &[T]) -> T;

    fn in_support(&self, x: &[T]) -> bool {
        self.log_density(x) > T::neg_infinity()
    }
}

impl<T: Real, P: TargetDensity<T> + ?Sized> TargetDensity<T> for &P {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn log_density(&self, x: &[T]) -> T {
        (**self).log_density(x)
    }

    fn in_support(&self, x: &[T]) -> bool {
        (**self).in_support(x)
    }
}

/// `min{1, π(y)q(x|y) / π(x)q(y|x)}` from log terms.
pub fn mh_acceptance<T: Real>(log_pi_x: T, log_pi_y: T, log_q_xy: T, log_q_yx: T) -> Result<T> {
    if log_pi_x == T::neg_infinity() {
        return Err(Error::invalid_state("current state has zero target density"));
    }
    if log_pi_y == T::neg_infinity() {
        return Ok(T::zero());
    }
    let log_ratio = log_pi_y + log_q_xy - log_pi_x - log_q_yx;
    Ok(log_ratio.min(T::zero()).exp())
}

/// Barker's `num / (num + den)` from `log num`, `log den`.
pub fn barker_acceptance<T: Real>(log_num: T, log_den: T) -> Result<T> {
    if log_num == T::neg_infinity() && log_den == T::neg_infinity() {
        return Err(Error::invalid_state("Barker ratio with both terms zero"));
    }
    if log_num == T::neg_infinity() {
        return Ok(T::zero());
    }
    Ok(T::one() / (T::one() + (log_den - log_num).exp()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    MhExact,
    BarkerExact,
    BarkerTwoCoin,
    RamAuxiliary,
    /// Metropolis-Hastings with estimated proposal normalizers (inexact).
    MhPluginNormalizer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StepInfo {
    pub accepted: bool,
    /// Two-coin loops for the factory kernel; forced-down loops for the
    /// auxiliary state `z*` in the auxiliary RAM kernel.
    pub loops: Option<u64>,
}

/// A Markov kernel that owns its current state.
pub trait Kernel<T: Real> {
    fn kind(&self) -> KernelKind;
    fn state(&self) -> &[T];
    fn step(&mut self, rng: &mut RngStream) -> Result<StepInfo>;
}

impl<T: Real, K: Kernel<T> + ?Sized> Kernel<T> for Box<K> {
    fn kind(&self) -> KernelKind {
        (**self).kind()
    }

    fn state(&self) -> &[T] {
        (**self).state()
    }

    fn step(&mut self, rng: &mut RngStream) -> Result<StepInfo> {
        (**self).step(rng)
    }
}

fn initial_log_density<T: Real, P: TargetDensity<T>>(target: &P, x: &[T]) -> Result<T> {
    if x.len() != target.dim() {
        return Err(Error::invalid_state(format!(
            "initial state has dimension {}, target has {}",
            x.len(),
            target.dim()
        )));
    }
    let lp = target.log_density(x);
    if lp == T::neg_infinity() || lp.is_nan() {
        return Err(Error::invalid_state("initial state outside the target support"));
    }
    Ok(lp)
}

/// Metropolis-Hastings (`exact = Mh`) or Barker with an evaluable proposal.
pub struct ExactKernel<T, P, Q> {
    target: P,
    proposal: Q,
    barker: bool,
    x: Vec<T>,
    log_pi_x: T,
}

impl<T: Real, P: TargetDensity<T>, Q: TractableProposal<T>> ExactKernel<T, P, Q> {
    pub fn metropolis(target: P, proposal: Q, init: Vec<T>) -> Result<Self> {
        let log_pi_x = initial_log_density(&target, &init)?;
        Ok(Self {
            target,
            proposal,
            barker: false,
            x: init,
            log_pi_x,
        })
    }

    pub fn barker(target: P, proposal: Q, init: Vec<T>) -> Result<Self> {
        let mut k = Self::metropolis(target, proposal, init)?;
        k.barker = true;
        Ok(k)
    }
}

impl<T: Real, P: TargetDensity<T>, Q: TractableProposal<T>> Kernel<T> for ExactKernel<T, P, Q> {
    fn kind(&self) -> KernelKind {
        if self.barker {
            KernelKind::BarkerExact
        } else {
            KernelKind::MhExact
        }
    }

    fn state(&self) -> &[T] {
        &self.x
    }

    fn step(&mut self, rng: &mut RngStream) -> Result<StepInfo> {
        let y = self.proposal.sample(&self.x, rng)?;
        let log_pi_y = self.target.log_density(&y);
        let alpha = if log_pi_y == T::neg_infinity() {
            T::zero()
        } else {
            let (log_q_xy, log_q_yx) = if self.proposal.is_symmetric() {
                (T::zero(), T::zero())
            } else {
                (
                    self.proposal.log_density(&self.x, &y),
                    self.proposal.log_density(&y, &self.x),
                )
            };
            if self.barker {
                barker_acceptance(log_pi_y + log_q_xy, self.log_pi_x + log_q_yx)?
            } else {
                mh_acceptance(self.log_pi_x, log_pi_y, log_q_xy, log_q_yx)?
            }
        };
        let accepted = rng.coin(alpha);
        if accepted {
            self.x = y;
            self.log_pi_x = log_pi_y;
        }
        Ok(StepInfo {
            accepted,
            loops: None,
        })
    }
}

/// Barker's algorithm for an intractable proposal: the accept/reject coin
/// comes from the two-coin factory with
/// `c_x = π̃(x) q̃(y|x) b_y`, `c_y = π̃(y) q̃(x|y) b_x`,
/// `p_x = r(y)/b_y`, `p_y = r(x)/b_x`.
pub struct TwoCoinKernel<T, P, Q> {
    target: P,
    proposal: Q,
    x: Vec<T>,
    log_pi_x: T,
    max_loops: Option<u64>,
    down_loops: LoopAccumulator,
    up_loops: LoopAccumulator,
}

impl<T: Real, P: TargetDensity<T>, Q: IntractableProposal<T>> TwoCoinKernel<T, P, Q> {
    pub fn new(target: P, proposal: Q, init: Vec<T>) -> Result<Self> {
        let log_pi_x = initial_log_density(&target, &init)?;
        Ok(Self {
            target,
            proposal,
            x: init,
            log_pi_x,
            max_loops: Some(DEFAULT_MAX_LOOPS),
            down_loops: LoopAccumulator::default(),
            up_loops: LoopAccumulator::default(),
        })
    }

    /// `None` removes the loop cap.
    pub fn with_max_loops(mut self, max_loops: Option<u64>) -> Self {
        self.max_loops = max_loops;
        self
    }

    /// Inner down/up loop statistics reported by the proposal, if any.
    pub fn proposal_loops(&self) -> Option<(LoopAccumulator, LoopAccumulator)> {
        (self.down_loops.calls > 0).then_some((self.down_loops, self.up_loops))
    }

    pub fn proposal(&self) -> &Q {
        &self.proposal
    }
}

impl<T: Real, P: TargetDensity<T>, Q: IntractableProposal<T>> Kernel<T> for TwoCoinKernel<T, P, Q> {
    fn kind(&self) -> KernelKind {
        KernelKind::BarkerTwoCoin
    }

    fn state(&self) -> &[T] {
        &self.x
    }

    fn step(&mut self, rng: &mut RngStream) -> Result<StepInfo> {
        let (y, inner) = self.proposal.sample_traced(&self.x, rng)?;
        if let Some([down, up]) = inner {
            self.down_loops.record(down);
            self.up_loops.record(up);
        }
        let log_pi_y = self.target.log_density(&y);
        if log_pi_y == T::neg_infinity() {
            // c_y = 0: the factory would reject with certainty.
            return Ok(StepInfo {
                accepted: false,
                loops: None,
            });
        }
        let log_cx = self.log_pi_x + self.proposal.log_qtilde(&y, &self.x) + self.proposal.log_bound(&y);
        let log_cy = log_pi_y + self.proposal.log_qtilde(&self.x, &y) + self.proposal.log_bound(&self.x);
        let accepted = {
            let inputs = TwoCoinInputs::new(
                log_cx,
                log_cy,
                self.proposal.normalizer_coin(&y),
                self.proposal.normalizer_coin(&self.x),
            )?;
            let (accepted, stats) = two_coin(&inputs, rng, self.max_loops)?;
            (accepted, stats.loops)
        };
        if accepted.0 {
            self.x = y;
            self.log_pi_x = log_pi_y;
        }
        Ok(StepInfo {
            accepted: accepted.0,
            loops: Some(accepted.1),
        })
    }
}

/// `(x, z)` pair carried by the auxiliary-variable RAM sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxiliaryState<T> {
    pub x: Vec<T>,
    pub z: Vec<T>,
    log_pi_x: T,
    log_pi_z: T,
}

impl<T: Real> AuxiliaryState<T> {
    pub fn new<P: TargetDensity<T>>(target: &P, x: Vec<T>, z: Vec<T>) -> Result<Self> {
        let log_pi_x = initial_log_density(target, &x)?;
        let log_pi_z = initial_log_density(target, &z)?;
        Ok(Self {
            x,
            z,
            log_pi_x,
            log_pi_z,
        })
    }

    pub fn log_pi_x(&self) -> T {
        self.log_pi_x
    }
}

/// Outcome of one auxiliary-variable RAM update.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxiliaryStep<T> {
    pub state: AuxiliaryState<T>,
    pub accepted: bool,
    /// Loops of the three forced moves: down to `x'`, up to `y`, down to `z*`.
    pub loops: [u64; 3],
    pub acceptance_probability: T,
}

/// Log of the auxiliary-variable acceptance ratio
/// `π(y) min{1, (π(x)+ε)/(π(z)+ε)} / (π(x) min{1, (π(y)+ε)/(π(z*)+ε)})`.
pub fn ram_auxiliary_log_ratio<T: Real>(
    log_epsilon: T,
    log_pi_x: T,
    log_pi_z: T,
    log_pi_y: T,
    log_pi_zstar: T,
) -> T {
    let lift = |lp: T| log_add_exp(lp, log_epsilon);
    let num = log_pi_y + (lift(log_pi_x) - lift(log_pi_z)).min(T::zero());
    let den = log_pi_x + (lift(log_pi_y) - lift(log_pi_zstar)).min(T::zero());
    num - den
}

/// One full auxiliary-variable RAM update.
pub fn ram_auxiliary_step<T, P, S>(
    state: &AuxiliaryState<T>,
    ram: &RamProposal<'_, T, P, S>,
    rng: &mut RngStream,
) -> Result<AuxiliaryStep<T>>
where
    T: Real,
    P: TargetDensity<T>,
    S: TractableProposal<T>,
{
    let (xp, log_pi_xp, l1) = ram.forced_down(&state.x, state.log_pi_x, rng)?;
    let (y, log_pi_y, l2) = ram.forced_up(&xp, log_pi_xp, rng)?;
    let (zstar, log_pi_zstar, l3) = ram.forced_down(&y, log_pi_y, rng)?;
    let log_ratio = if log_pi_y == T::neg_infinity() {
        T::neg_infinity()
    } else {
        ram_auxiliary_log_ratio(ram.log_epsilon(), state.log_pi_x, state.log_pi_z, log_pi_y, log_pi_zstar)
    };
    let alpha = log_ratio.min(T::zero()).exp();
    let u4 = rng.uniform::<T>();
    let accepted = u4 < alpha;
    let next = if accepted {
        AuxiliaryState {
            x: y,
            z: zstar,
            log_pi_x: log_pi_y,
            log_pi_z: log_pi_zstar,
        }
    } else {
        state.clone()
    };
    Ok(AuxiliaryStep {
        state: next,
        accepted,
        loops: [l1, l2, l3],
        acceptance_probability: alpha,
    })
}

/// Auxiliary-variable RAM as a [`Kernel`]; requires a symmetric inner walk.
pub struct RamAuxKernel<'a, T, P, S> {
    ram: RamProposal<'a, T, P, S>,
    state: AuxiliaryState<T>,
    down_loops: LoopAccumulator,
    up_loops: LoopAccumulator,
}

impl<'a, T, P, S> RamAuxKernel<'a, T, P, S>
where
    T: Real,
    P: TargetDensity<T>,
    S: TractableProposal<T>,
{
    /// Starts at `x` with `z` drawn by a forced-downward move from `x`.
    pub fn new(ram: RamProposal<'a, T, P, S>, x: Vec<T>, rng: &mut RngStream) -> Result<Self> {
        if !ram.inner().is_symmetric() {
            return Err(Error::Incompatible(
                "the auxiliary-variable RAM sampler requires a symmetric inner proposal".into(),
            ));
        }
        let log_pi_x = initial_log_density(ram.target(), &x)?;
        let (z, log_pi_z, _) = ram.forced_down(&x, log_pi_x, rng)?;
        if log_pi_z == T::neg_infinity() {
            return Err(Error::invalid_state("auxiliary variable initialised off the support"));
        }
        Ok(Self {
            ram,
            state: AuxiliaryState {
                x,
                z,
                log_pi_x,
                log_pi_z,
            },
            down_loops: LoopAccumulator::default(),
            up_loops: LoopAccumulator::default(),
        })
    }

    pub fn auxiliary_state(&self) -> &AuxiliaryState<T> {
        &self.state
    }

    pub fn proposal_loops(&self) -> (LoopAccumulator, LoopAccumulator) {
        (self.down_loops, self.up_loops)
    }
}

impl<T, P, S> Kernel<T> for RamAuxKernel<'_, T, P, S>
where
    T: Real,
    P: TargetDensity<T>,
    S: TractableProposal<T>,
{
    fn kind(&self) -> KernelKind {
        KernelKind::RamAuxiliary
    }

    fn state(&self) -> &[T] {
        &self.state.x
    }

    fn step(&mut self, rng: &mut RngStream) -> Result<StepInfo> {
        let out = ram_auxiliary_step(&self.state, &self.ram, rng)?;
        self.down_loops.record(out.loops[0]);
        self.up_loops.record(out.loops[1]);
        self.state = out.state;
        Ok(StepInfo {
            accepted: out.accepted,
            loops: Some(out.loops[2]),
        })
    }
}

/// Options for [`run_chain`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Steps discarded before recording.
    pub burn_in: u64,
    /// Keep every step's loop count, not only the running mean and max.
    pub record_step_loops: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            burn_in: 10_000,
            record_step_loops: false,
        }
    }
}

/// A recorded chain: `n + 1` states and `n` acceptance indicators.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainTrace<T> {
    pub dim: usize,
    /// Row-major `(n + 1) x dim`.
    pub states: Vec<T>,
    pub accepted: Vec<bool>,
    pub loops: LoopAccumulator,
    pub step_loops: Option<Vec<u64>>,
    pub seed: u64,
    pub stream_id: u64,
    pub tuning: T,
    pub kind: KernelKind,
    /// Seconds spent in the recorded (post burn-in) steps.
    pub wall_time_sec: f64,
}

impl<T: Real> ChainTrace<T> {
    pub fn len(&self) -> usize {
        self.accepted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accepted.is_empty()
    }

    pub fn state(&self, k: usize) -> &[T] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn coordinate(&self, j: usize) -> Vec<T> {
        self.states.iter().skip(j).step_by(self.dim).copied().collect()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.accepted.is_empty() {
            return 0.0;
        }
        self.accepted.iter().filter(|&&a| a).count() as f64 / self.accepted.len() as f64
    }
}

/// Runs `burn_in + n` steps and records the last `n` transitions.
pub fn run_chain<T: Real, K: Kernel<T>>(
    kernel: &mut K,
    n: u64,
    rng: &mut RngStream,
    tuning: T,
    opts: RunOptions,
) -> Result<ChainTrace<T>> {
    for k in 0..opts.burn_in {
        kernel.step(rng).map_err(|e| e.at_step(k))?;
    }
    let dim = kernel.state().len();
    let mut states = Vec::with_capacity((n as usize + 1) * dim);
    states.extend_from_slice(kernel.state());
    let mut accepted = Vec::with_capacity(n as usize);
    let mut loops = LoopAccumulator::default();
    let mut step_loops = opts.record_step_loops.then(|| Vec::with_capacity(n as usize));
    let start = Instant::now();
    for k in 0..n {
        let info = kernel.step(rng).map_err(|e| e.at_step(opts.burn_in + k))?;
        states.extend_from_slice(kernel.state());
        accepted.push(info.accepted);
        if let Some(l) = info.loops {
            loops.record(l);
        }
        if let Some(v) = step_loops.as_mut() {
            v.push(info.loops.unwrap_or(0));
        }
    }
    Ok(ChainTrace {
        dim,
        states,
        accepted,
        loops,
        step_loops,
        seed: rng.seed(),
        stream_id: rng.stream_id(),
        tuning,
        kind: kernel.kind(),
        wall_time_sec: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuneOptions {
    /// Accepted distance between pilot rate and goal.
    pub tolerance: f64,
    pub max_rounds: usize,
    /// Robbins-Monro gain: `log s += gain * (rate - goal) / k`.
    pub gain: f64,
}

impl Default for TuneOptions {
    fn default() -> Self {
        Self {
            tolerance: 0.02,
            max_rounds: 60,
            gain: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TunedScale<T> {
    pub scale: T,
    pub rate: f64,
    pub rounds: usize,
    /// Final state of the last pilot run, usable as a warm start.
    pub state: Vec<T>,
}

/// Searches the scalar tuning parameter (a variance `h` or a covariance
/// multiplier `η`) until a pilot run of `pilot_n` steps has acceptance
/// within `opts.tolerance` of `goal_rate`.
///
/// `build(scale, start)` constructs the kernel for one pilot run; each pilot
/// continues from where the previous one stopped.
pub fn tune_scale<T, K, B>(
    mut build: B,
    initial_scale: T,
    start: Vec<T>,
    goal_rate: f64,
    pilot_n: u64,
    rng: &mut RngStream,
    opts: TuneOptions,
) -> Result<TunedScale<T>>
where
    T: Real,
    K: Kernel<T>,
    B: FnMut(T, Vec<T>) -> Result<K>,
{
    if !(goal_rate > 0.0 && goal_rate < 1.0) {
        return Err(Error::Domain(format!("goal acceptance rate {goal_rate} outside (0, 1)")));
    }
    if !(initial_scale > T::zero()) || pilot_n == 0 {
        return Err(Error::Domain("tuning needs a positive initial scale and pilot length".into()));
    }
    let mut log_scale = initial_scale.to_f64_lossy().ln();
    let mut state = start;
    let mut rate = f64::NAN;
    for round in 1..=opts.max_rounds {
        let scale = T::of(log_scale.exp());
        let mut kernel = build(scale, state)?;
        let mut hits = 0u64;
        for k in 0..pilot_n {
            hits += kernel.step(rng).map_err(|e| e.at_step(k))?.accepted as u64;
        }
        state = kernel.state().to_vec();
        rate = hits as f64 / pilot_n as f64;
        if (rate - goal_rate).abs() <= opts.tolerance {
            return Ok(TunedScale {
                scale,
                rate,
                rounds: round,
                state,
            });
        }
        log_scale += opts.gain * (rate - goal_rate) / round as f64;
    }
    Err(Error::TuningFailure {
        rounds: opts.max_rounds,
        last_rate: rate,
        goal: goal_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mh_acceptance_cases() {
        assert_eq!(mh_acceptance(0.3, 0.3, 0.3, 0.3).unwrap(), 1.0);
        assert_eq!(mh_acceptance(0.0, f64::NEG_INFINITY, 0.0, 0.0).unwrap(), 0.0);
        let a = mh_acceptance(0.0, 0.5_f64.ln(), 0.0, 0.0).unwrap();
        assert!((a - 0.5).abs() < 1e-15);
        assert!(mh_acceptance(f64::NEG_INFINITY, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn barker_acceptance_cases() {
        assert_eq!(barker_acceptance(1.7, 1.7).unwrap(), 0.5);
        assert_eq!(barker_acceptance(f64::NEG_INFINITY, 1.0).unwrap(), 0.0);
        let a = barker_acceptance(0.0, 3.0_f64.ln()).unwrap();
        assert!((a - 0.25).abs() < 1e-15);
        assert!(barker_acceptance(f64::NEG_INFINITY, f64::NEG_INFINITY).is_err());
        // Large magnitudes stay finite.
        assert!((barker_acceptance(-2000.0, -2001.0).unwrap() - 1.0 / (1.0 + (-1.0f64).exp())).abs() < 1e-15);
        assert_eq!(barker_acceptance(0.0_f32, f32::INFINITY).unwrap(), 0.0);
    }

    #[test]
    fn auxiliary_ratio_symmetric_case_is_one() {
        let r = ram_auxiliary_log_ratio(-10.0, -1.0, -3.0, -1.0, -3.0);
        assert_eq!(r, 0.0);
    }
}
