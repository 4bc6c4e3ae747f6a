use noma_core::channel::{generate_channels, ChannelModelParams};
use noma_core::maxmin::{solve_maxmin, BisectionOptions};
use noma_core::model::compute_rates;
use noma_core::sca::{solve_powermin_sca, ScaOptions};
use noma_core::sdr::solve_powermin_sdr;
use noma_core::SystemConfig;

fn params() -> ChannelModelParams {
    ChannelModelParams {
        pathloss_exponent: 0.0,
        ..ChannelModelParams::default()
    }
}

#[test]
fn relaxation_bounds_sca_and_sca_is_feasible() {
    for trial in 0..10 {
        let cfg = SystemConfig::uniform(3, 3, 0.01, 2.0).with_seed(21);
        let ch = generate_channels(&cfg, &params(), trial).unwrap();
        let (w, trace) = solve_powermin_sca(&ch, &cfg, &ScaOptions::default()).unwrap();
        let sdr = solve_powermin_sdr(&ch, &cfg).unwrap();
        let p = w.total_power();
        assert!(sdr.relaxation_objective <= p * (1.0 + 1e-6), "trial {trial}: {} > {p}", sdr.relaxation_objective);
        assert!(sdr.relaxation_objective <= sdr.recovered_objective * (1.0 + 1e-6));
        let rep = compute_rates(&ch, &w, &cfg).unwrap();
        assert!(rep.rates.iter().all(|r| *r >= 2.0 - 1e-6), "{:?}", rep.rates);
        assert!(trace.total_power.windows(2).all(|s| s[1] <= s[0] * (1.0 + 1e-9)));
    }
}

#[test]
fn maxmin_respects_budget_and_rates() {
    for trial in 0..3 {
        let cfg = SystemConfig::uniform(2, 2, 0.01, 1.0).with_seed(8).with_power_budget(5.0);
        let ch = generate_channels(&cfg, &params(), trial).unwrap();
        let res = solve_maxmin(&ch, &cfg, &BisectionOptions::default()).unwrap();
        assert!(res.rate > 0.0);
        assert!(res.total_power <= 5.0 * (1.0 + 1e-6), "{}", res.total_power);
        let rep = compute_rates(&ch, &res.beamformers, &cfg).unwrap();
        assert!(rep.rates.iter().all(|r| *r >= res.rate - 1e-6), "{:?} < {}", rep.rates, res.rate);
        let lengths: Vec<f64> = res.log.iter().map(|s| s.length).collect();
        assert!(lengths.windows(2).all(|p| (p[1] - p[0] / 2.0).abs() <= 1e-12 * p[0]));
        assert!(*lengths.last().unwrap() <= 1e-3);
    }
}
