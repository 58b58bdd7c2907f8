//! Parameter-file interface for the bound calculators: a JSON document
//! tagged by `kind` evaluates to a [`BoundReport`].

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bounds::{
    bias_variance_bound, concentration_tail_report, landweber_rate_bound, multistep_rate_bound,
    optimal_rate_exponent, oracle_rhs, BoundKind, BoundReport, OraclePerK, RateConstantVariant,
};
use crate::error::{Error, Result};

/// A bound-evaluation request, as read from a parameter file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundRequest {
    BiasVariance {
        omega_mu_k: f64,
        source_rho: f64,
        sigma2: f64,
        trace_term: f64,
    },
    LandweberRate {
        k: usize,
        mu: f64,
        p: f64,
        tau: f64,
        source_rho: f64,
        sigma2: f64,
        n: usize,
        #[serde(default)]
        statement_constants: bool,
    },
    MultistepRate {
        schedule_sum: f64,
        mu: f64,
        p: f64,
        source_rho: f64,
        sigma2: f64,
        n: usize,
        #[serde(default)]
        statement_constants: bool,
    },
    Oracle {
        nu: f64,
        c: f64,
        d: f64,
        r: f64,
        sigma2: f64,
        n: usize,
        per_k: Vec<OraclePerK>,
    },
    Tail {
        trace: f64,
        radius: f64,
        r: f64,
        l: f64,
        u: f64,
        d: f64,
    },
    OptimalRateExponent {
        p: f64,
        mu: f64,
    },
}

impl BoundRequest {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("bound request parse: {e}")))
    }

    pub fn evaluate(&self) -> Result<BoundReport> {
        match self {
            BoundRequest::BiasVariance {
                omega_mu_k,
                source_rho,
                sigma2,
                trace_term,
            } => bias_variance_bound(*omega_mu_k, *source_rho, *sigma2, *trace_term),
            BoundRequest::LandweberRate {
                k,
                mu,
                p,
                tau,
                source_rho,
                sigma2,
                n,
                statement_constants,
            } => landweber_rate_bound(
                *k,
                *mu,
                *p,
                *tau,
                *source_rho,
                *sigma2,
                *n,
                variant(*statement_constants),
            ),
            BoundRequest::MultistepRate {
                schedule_sum,
                mu,
                p,
                source_rho,
                sigma2,
                n,
                statement_constants,
            } => multistep_rate_bound(
                *schedule_sum,
                *mu,
                *p,
                *source_rho,
                *sigma2,
                *n,
                variant(*statement_constants),
            ),
            BoundRequest::Oracle {
                nu,
                c,
                d,
                r,
                sigma2,
                n,
                per_k,
            } => oracle_rhs(per_k, *nu, *c, *d, *r, *sigma2, *n),
            BoundRequest::Tail {
                trace,
                radius,
                r,
                l,
                u,
                d,
            } => concentration_tail_report(*trace, *radius, *r, *l, *u, *d),
            BoundRequest::OptimalRateExponent { p, mu } => {
                if !(*p > 0.5) {
                    return Err(Error::Domain(format!("p must exceed 1/2, got {p}")));
                }
                if !(*mu >= 0.0) {
                    return Err(Error::Domain(format!("mu must be >= 0, got {mu}")));
                }
                let value = optimal_rate_exponent(*p, *mu);
                Ok(BoundReport {
                    kind: BoundKind::OptimalRateExponent,
                    inputs: [("p".to_string(), *p), ("mu".to_string(), *mu)]
                        .into_iter()
                        .collect(),
                    value,
                    breakdown: vec![("exponent".into(), value)],
                })
            }
        }
    }
}

fn variant(statement: bool) -> RateConstantVariant {
    if statement {
        RateConstantVariant::Statement
    } else {
        RateConstantVariant::Derivation
    }
}

/// Evaluates a request file and writes `bound.json` into the output
/// directory; returns the report and the emitted path.
pub fn emit_bound(request_path: &Path, out_dir: &Path) -> Result<(BoundReport, PathBuf)> {
    let request = BoundRequest::from_path(request_path)?;
    let report = request.evaluate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let path = out_dir.join("bound.json");
    std::fs::write(
        &path,
        serde_json::to_string_pretty(&report).expect("report serializes"),
    )
    .map_err(|e| Error::io(&path, e))?;
    Ok((report, path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn requests_parse_and_evaluate() {
        let req: BoundRequest = serde_json::from_str(
            r#"{"kind": "bias_variance", "omega_mu_k": 0.1, "source_rho": 1.0,
                "sigma2": 1.0, "trace_term": 0.02}"#,
        )
        .unwrap();
        let report = req.evaluate().unwrap();
        assert!((report.value - 0.06).abs() < 1e-15);

        let req: BoundRequest = serde_json::from_str(
            r#"{"kind": "optimal_rate_exponent", "p": 1.0, "mu": 0.5}"#,
        )
        .unwrap();
        assert!((req.evaluate().unwrap().value - 0.4).abs() < 1e-15);

        let req: BoundRequest = serde_json::from_str(
            r#"{"kind": "landweber_rate", "k": 10, "mu": 0.5, "p": 1.0, "tau": 0.5,
                "source_rho": 1.0, "sigma2": 1.0, "n": 10000}"#,
        )
        .unwrap();
        assert!(req.evaluate().unwrap().value > 0.0);
    }

    #[test]
    fn emit_writes_bound_json() {
        let dir = tempfile::tempdir().unwrap();
        let request_path = dir.path().join("request.json");
        std::fs::write(
            &request_path,
            r#"{"kind": "tail", "trace": 1.0, "radius": 0.5, "r": 2.5,
                "l": 0.0, "u": 2.0, "d": 0.1}"#,
        )
        .unwrap();
        let (report, path) = emit_bound(&request_path, dir.path()).unwrap();
        assert!(path.exists());
        assert!(report.value > 0.0 && report.value < 1.0);
        let parsed: BoundReport =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(parsed, report);
    }

    #[test]
    fn malformed_request_is_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let request_path = dir.path().join("bad.json");
        std::fs::write(&request_path, r#"{"kind": "unknown_bound"}"#).unwrap();
        assert!(matches!(
            emit_bound(&request_path, dir.path()),
            Err(Error::Config(_))
        ));
    }
}
