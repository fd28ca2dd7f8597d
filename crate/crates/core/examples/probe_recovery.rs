use linshap::experiments::recovery::{run_recovery, ModelKind, RecoveryConfig};
use linshap::ValueMode;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let perms: u64 = args.get(1).and_then(|v| v.parse().ok()).unwrap_or(500);
    let seeds: u64 = args.get(2).and_then(|v| v.parse().ok()).unwrap_or(10);
    let mut lasso_obs_vs_int = Vec::new();
    let mut en_vs_lasso_int = Vec::new();
    for seed in 0..seeds {
        let cfg = RecoveryConfig { permutations: perms, seed, ..RecoveryConfig::default() };
        let t0 = std::time::Instant::now();
        let report = run_recovery(&cfg).unwrap();
        let li = report.arm(ModelKind::Lasso, ValueMode::Interventional).auc;
        let lo = report.arm(ModelKind::Lasso, ValueMode::Observational).auc;
        let ei = report.arm(ModelKind::ElasticNet, ValueMode::Interventional).auc;
        let eo = report.arm(ModelKind::ElasticNet, ValueMode::Observational).auc;
        let zeroed_causal: Vec<usize> = report
            .causal_set
            .iter()
            .copied()
            .filter(|&c| report.lasso_coefficients[c].abs() < 1e-12)
            .collect();
        let nonzero_lasso = report.lasso_coefficients.iter().filter(|c| c.abs() > 1e-12).count();
        let nonzero_en = report.elastic_net_coefficients.iter().filter(|c| c.abs() > 1e-12).count();
        println!(
            "seed {seed}: L/int {li:.4} L/obs {lo:.4} EN/int {ei:.4} EN/obs {eo:.4} | d(obs-int) {:+.4} d(EN-L) {:+.4} | lasso nz {nonzero_lasso} en nz {nonzero_en} zeroed-causal {:?} | pen L {:.3e} EN {:.3e} | {:.1}s",
            lo - li, ei - li, zeroed_causal, report.lasso_penalty, report.elastic_net_penalty,
            t0.elapsed().as_secs_f64()
        );
        lasso_obs_vs_int.push(lo - li);
        en_vs_lasso_int.push(ei - li);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let pos = |v: &[f64]| v.iter().filter(|d| **d > 0.0).count();
    println!(
        "L obs-int: mean {:+.4} positive {}/{}  |  EN-L int: mean {:+.4} positive {}/{}",
        mean(&lasso_obs_vs_int), pos(&lasso_obs_vs_int), seeds,
        mean(&en_vs_lasso_int), pos(&en_vs_lasso_int), seeds
    );
}
