use bfmcmc::diagnostics::ess_batch_means;
use bfmcmc::kernels::{run_chain, tune_scale, ExactKernel, RunOptions, TuneOptions, TwoCoinKernel};
use bfmcmc::models::gamma_target;
use bfmcmc::proposals::{trunc_gauss_1d, Interval};
use bfmcmc::RngStream;

#[test]
fn metropolis_beats_barker_with_the_same_proposal() {
    let target = gamma_target(2.0f64, 1.0).unwrap();
    let mut rng = RngStream::new(50, 0);
    let h = tune_scale(
        |h: f64, s| TwoCoinKernel::new(&target, trunc_gauss_1d(Interval::positive(), h)?, s),
        1.0,
        vec![1.0],
        0.25,
        20_000,
        &mut rng,
        TuneOptions::default(),
    )
    .unwrap()
    .scale;
    let opts = RunOptions {
        burn_in: 1_000,
        record_step_loops: false,
    };
    let n = 200_000;
    let mut wins = 0;
    let mut ratio_sum = 0.0;
    for rep in 0..100 {
        let mut rng = RngStream::new(51, rep);
        let mut bf = TwoCoinKernel::new(&target, trunc_gauss_1d(Interval::positive(), h).unwrap(), vec![1.0]).unwrap();
        let tb = run_chain(&mut bf, n, &mut rng, h, opts).unwrap();
        let p = trunc_gauss_1d(Interval::positive(), h).unwrap().with_evaluated_normalizer();
        let mut mh = ExactKernel::metropolis(&target, p, vec![1.0]).unwrap();
        let tm = run_chain(&mut mh, n, &mut rng, h, opts).unwrap();
        let eb = ess_batch_means(&tb.coordinate(0)[1..]).unwrap().ess;
        let em = ess_batch_means(&tm.coordinate(0)[1..]).unwrap().ess;
        wins += (em >= eb) as u32;
        ratio_sum += em / eb;
    }
    assert!(wins >= 90, "MH ahead in {wins}/100");
    let ratio = ratio_sum / 100.0;
    assert!((1.1..=1.7).contains(&ratio), "mean ratio {ratio}");
}
