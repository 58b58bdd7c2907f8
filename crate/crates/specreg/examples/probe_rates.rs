use std::time::Instant;

use specreg::harness::{rate_study, ExperimentConfig};

fn run(p: f64, mu: f64, sigma: f64, r: usize) {
    let cfg = ExperimentConfig::from_json(&format!(
        r#"{{
            "problem": {{"p": {p}, "mu": {mu}, "sigma": {sigma},
                         "n_list": [250, 1000, 4000, 16000]}},
            "run": {{"replicates": {r}, "base_seed": 424242}}
        }}"#
    ))
    .unwrap();
    let t = Instant::now();
    let report = rate_study(&cfg).unwrap();
    println!(
        "p={p} mu={mu} sigma={sigma} R={r}  ({:.1}s)  target -{:.4}",
        t.elapsed().as_secs_f64(),
        report.target_exponent
    );
    for pt in &report.points {
        println!(
            "  n={:6} d={:3} oracle={:.6e} (se {:.1e}) adaptive={:.6e} (se {:.1e}) ratio={:.2}",
            pt.n,
            pt.d_m,
            pt.mean_oracle_loss,
            pt.se_oracle_loss,
            pt.mean_adaptive_loss,
            pt.se_adaptive_loss,
            pt.mean_adaptive_loss / pt.mean_oracle_loss
        );
    }
    println!(
        "  oracle slope {:.4} (R2 {:.4})  adaptive slope {:.4} (R2 {:.4})",
        report.oracle_fit.slope,
        report.oracle_fit.r_squared,
        report.adaptive_fit.slope,
        report.adaptive_fit.r_squared
    );
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    if args.len() >= 4 {
        let p: f64 = args[1].parse().unwrap();
        let mu: f64 = args[2].parse().unwrap();
        let sigma: f64 = args[3].parse().unwrap();
        let r: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(200);
        run(p, mu, sigma, r);
        return;
    }
    run(1.0, 0.5, 0.1, 200);
    run(1.5, 0.25, 0.1, 200);
}
