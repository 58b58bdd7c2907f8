//! Built-in verification suite: quick, seeded versions of the library's
//! cross-oracle and invariant checks, printing one pass/fail line each.
//! The full-depth versions live in the acceptance test suite; this command
//! exists so a deployed binary can check itself.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::filters::{FilterSpec, ScheduleRule};
use crate::model::{make_diagonal_problem, DiagonalProblemParams};
use crate::selector::{estimate_spectral, landweber_iterate, radius_r, trace_r, LandweberIteration};
use crate::spectral::{empirical_inner, project_onto_ym, svd, DesignMatrix};

struct Check {
    name: &'static str,
    outcome: std::result::Result<(), String>,
}

fn check(name: &'static str, f: impl FnOnce() -> std::result::Result<(), String>) -> Check {
    Check {
        name,
        outcome: f(),
    }
}

/// Runs every check, printing one line per check. Returns `Ok(true)` when
/// all pass.
pub fn run_verification() -> Result<bool> {
    let checks = vec![
        check("filter identity lambda*Q + r = 1", filter_identity),
        check("landweber iterate matches spectral filter", iterate_vs_spectral),
        check("projection is pythagorean and idempotent", projection_checks),
        check("noiseless filter output converges to the truth", noiseless_convergence),
        check("penalty terms ordered and monotone", penalty_terms),
        check("seeded replication is deterministic", determinism),
    ];
    let mut all = true;
    for c in &checks {
        match &c.outcome {
            Ok(()) => println!("PASS {}", c.name),
            Err(msg) => {
                all = false;
                println!("FAIL {}: {msg}", c.name);
            }
        }
    }
    Ok(all)
}

fn filter_identity() -> std::result::Result<(), String> {
    let lw = FilterSpec::landweber(0.5, 100, 2.0).map_err(|e| e.to_string())?;
    let ms = FilterSpec::multistep(
        ScheduleRule::Geometric {
            first: 0.5,
            ratio: 1.3,
        },
        100,
        2.0,
    )
    .map_err(|e| e.to_string())?;
    for f in [&lw, &ms] {
        for k in 1..=100usize {
            for i in 0..=50 {
                let lambda = 2.0 * i as f64 / 50.0;
                let q = f.q_value(k, lambda).map_err(|e| e.to_string())?;
                let r = f.residual_value(k, lambda).map_err(|e| e.to_string())?;
                let defect = (lambda * q + r - 1.0).abs();
                if defect > 1e-12 {
                    return Err(format!("defect {defect} at k={k}, lambda={lambda}"));
                }
            }
        }
    }
    Ok(())
}

fn iterate_vs_spectral() -> std::result::Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2026);
    for trial in 0..5 {
        let n = rng.gen_range(8..=32);
        let d = rng.gen_range(2..=6);
        let a = DesignMatrix::new(DMatrix::from_fn(n, d, |_, _| rng.gen_range(-1.0..1.0)))
            .map_err(|e| e.to_string())?;
        let s = svd(&a).map_err(|e| e.to_string())?;
        let y = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let tau = 0.5 / s.lambda_max();
        let filter = FilterSpec::landweber(tau, 100, s.lambda_max()).map_err(|e| e.to_string())?;
        let mut iter =
            LandweberIteration::new(&a, &y, tau, DVector::zeros(d)).map_err(|e| e.to_string())?;
        for k in 1..=100usize {
            iter.step().map_err(|e| e.to_string())?;
            let spectral = estimate_spectral(&s, &y, &filter, k)
                .and_then(|e| e.to_param(&s))
                .map_err(|e| e.to_string())?;
            let gap = (iter.current() - spectral).norm();
            if gap > 1e-10 * y.norm() {
                return Err(format!("trial {trial}: gap {gap} at k={k}"));
            }
        }
    }
    Ok(())
}

fn projection_checks() -> std::result::Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let frame = DMatrix::from_fn(16, 4, |i, j| ((i + 1) as f64 * 0.3).powi(j as i32));
    let basis = DesignMatrix::orthonormalize(frame).map_err(|e| e.to_string())?;
    for _ in 0..10 {
        let y = DVector::from_fn(16, |_, _| rng.gen_range(-1.0..1.0));
        let proj = project_onto_ym(&basis, &y).map_err(|e| e.to_string())?;
        let resid = &y - &proj;
        let total = empirical_inner(&y, &y).map_err(|e| e.to_string())?;
        let parts = empirical_inner(&proj, &proj).map_err(|e| e.to_string())?
            + empirical_inner(&resid, &resid).map_err(|e| e.to_string())?;
        if (total - parts).abs() > 1e-12 {
            return Err(format!("pythagoras defect {}", (total - parts).abs()));
        }
        let again = project_onto_ym(&basis, &proj).map_err(|e| e.to_string())?;
        if (again - &proj).norm() > 1e-10 {
            return Err("projector is not idempotent".into());
        }
    }
    Ok(())
}

fn noiseless_convergence() -> std::result::Result<(), String> {
    let params = DiagonalProblemParams::new(1.0, 5, 25, 1);
    let problem = make_diagonal_problem(&params).map_err(|e| e.to_string())?;
    let s = &problem.system;
    let filter =
        FilterSpec::default_landweber(s.lambda_max(), 100_000).map_err(|e| e.to_string())?;
    let lambdas = s.lambdas();
    let mut prev = f64::INFINITY;
    let mut reached = None;
    for k in 1..=100_000usize {
        let mut bias_sq = 0.0;
        for (j, lambda) in lambdas.iter().enumerate() {
            let r = filter.residual_value(k, *lambda).map_err(|e| e.to_string())?;
            let t = problem.truth_coeffs[j];
            bias_sq += r * r * t * t;
        }
        let bias = bias_sq.sqrt();
        if bias > prev + 1e-15 {
            return Err(format!("bias increased at k={k}"));
        }
        prev = bias;
        if bias < 1e-6 {
            reached = Some(k);
            break;
        }
    }
    match reached {
        Some(_) => Ok(()),
        None => Err("bias did not drop below 1e-6 within k <= 1e5".into()),
    }
}

fn penalty_terms() -> std::result::Result<(), String> {
    let params = DiagonalProblemParams::new(1.0, 5, 25, 2);
    let problem = make_diagonal_problem(&params).map_err(|e| e.to_string())?;
    let s = &problem.system;
    let filter = FilterSpec::default_landweber(s.lambda_max(), 50).map_err(|e| e.to_string())?;
    let mut prev = 0.0;
    for k in 1..=50usize {
        let tr = trace_r(s, &filter, k).map_err(|e| e.to_string())?;
        let rad = radius_r(s, &filter, k).map_err(|e| e.to_string())?;
        if rad > tr || tr > s.rank() as f64 * rad {
            return Err(format!("trace/radius sandwich broken at k={k}"));
        }
        if tr <= prev {
            return Err(format!("trace not increasing at k={k}"));
        }
        prev = tr;
    }
    Ok(())
}

fn determinism() -> std::result::Result<(), String> {
    let params = DiagonalProblemParams::new(1.0, 4, 20, 3);
    let problem = make_diagonal_problem(&params).map_err(|e| e.to_string())?;
    let eps1 = problem.noise.sample(20, 555);
    let eps2 = problem.noise.sample(20, 555);
    if eps1 != eps2 {
        return Err("identical seeds produced different noise".into());
    }
    let a = landweber_iterate(
        &problem.design,
        &problem.observe_truth(&eps1).map_err(|e| e.to_string())?,
        0.25 / problem.system.lambda_max(),
        25,
        DVector::zeros(4),
    )
    .map_err(|e| e.to_string())?;
    let b = landweber_iterate(
        &problem.design,
        &problem.observe_truth(&eps2).map_err(|e| e.to_string())?,
        0.25 / problem.system.lambda_max(),
        25,
        DVector::zeros(4),
    )
    .map_err(|e| e.to_string())?;
    if a != b {
        return Err("identical inputs produced different iterates".into());
    }
    Ok(())
}
