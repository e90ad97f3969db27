use proxopt::config::{GammaRule, RunConfig, ScenarioKind};
use proxopt::experiments::{run_experiment, MethodId};
use proxopt::metrics::settling_iteration;

fn settle_gap(series: &proxopt::metrics::MetricsSeries, thresh: f64) -> Option<usize> {
    let gaps: Vec<f64> = series.rows().iter().map(|r| r.f_gap).collect();
    settling_iteration(&gaps, thresh)
}

#[test]
fn gamma_rule_empirics() {
    for corr_len in [16.0, 32.0, 64.0] {
        for rule in [GammaRule::OneMinusCorr, GammaRule::ThreeSigma] {
            let mut w_tot = 0;
            for seed in [42u64, 7, 2024] {
                let mut cfg = RunConfig::defaults(ScenarioKind::Field);
                cfg.runs = 20;
                cfg.seed = Some(seed);
                cfg.gamma_rule = rule;
                cfg.corr_len = corr_len;
                let out =
                    run_experiment(&cfg, &[MethodId::SpProximity, MethodId::LmsStream], false)
                        .unwrap();
                let sp = &out.methods[0];
                let bl = &out.methods[1];
                let mut wins = 0;
                let mut detail = Vec::new();
                for (s, b) in sp.replicas.iter().zip(&bl.replicas) {
                    let (ts, tb) = (settle_gap(s, 0.1), settle_gap(b, 0.1));
                    detail.push((ts, tb));
                    match (ts, tb) {
                        (Some(a), Some(c)) if a < c => wins += 1,
                        (Some(_), None) => wins += 1,
                        _ => {}
                    }
                }
                w_tot += wins;
                let losses: Vec<_> = detail
                    .iter()
                    .filter(|(ts, tb)| match (ts, tb) {
                        (Some(a), Some(c)) => a >= c,
                        (None, _) => true,
                        _ => false,
                    })
                    .collect();
                println!(
                    "  corr_len {corr_len} rule {rule:?} seed {seed}: wins {wins}/20 non-wins {losses:?}"
                );
            }
            println!("corr_len {corr_len} rule {rule:?}: TOTAL settle wins {w_tot}/60");
        }
    }
}
