use linshap::experiments::recovery::{run_recovery, ModelKind, RecoveryConfig};
use linshap::ValueMode;

fn main() {
    for m in [30usize, 50, 80, 120, 200, 350, 500] {
        let mut d_obs = Vec::new();
        let mut d_en = Vec::new();
        let mut zeroed_any = 0;
        for seed in 0..10u64 {
            let cfg = RecoveryConfig {
                samples: m,
                n_explained: m.min(100),
                permutations: 300,
                cv_folds: 5,
                seed,
                ..RecoveryConfig::default()
            };
            let report = run_recovery(&cfg).unwrap();
            let li = report.arm(ModelKind::Lasso, ValueMode::Interventional).auc;
            let lo = report.arm(ModelKind::Lasso, ValueMode::Observational).auc;
            let ei = report.arm(ModelKind::ElasticNet, ValueMode::Interventional).auc;
            d_obs.push(lo - li);
            d_en.push(ei - li);
            let z = report.causal_set.iter().filter(|&&c| report.lasso_coefficients[c].abs() < 1e-12).count();
            if z > 0 { zeroed_any += 1; }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let pos = |v: &[f64]| v.iter().filter(|d| **d > 0.0).count();
        println!(
            "M={m:>3}: Lasso obs-int mean {:+.4} pos {:>2}/10 | EN-Lasso int mean {:+.4} pos {:>2}/10 | seeds w/ zeroed causal {}/10",
            mean(&d_obs), pos(&d_obs), mean(&d_en), pos(&d_en), zeroed_any
        );
    }
}
