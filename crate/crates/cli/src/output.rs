//! Result rendering. Computed numbers are printed with 17 significant digits
//! so output re-parses to the exact double.

use cfsem::{CounterfactualResult, IdentificationResult, Plan, RankOutcome, TauRoute};

use crate::model_file::error_class;
use crate::query::{ParsedQuery, QueryOutcome};

/// 17 significant digits; exact round-trip for any f64.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        return "null".to_string();
    }
    if v == f64::INFINITY {
        return "\"inf\"".to_string();
    }
    if v == f64::NEG_INFINITY {
        return "\"-inf\"".to_string();
    }
    format!("{v:.16e}")
}

fn str_list(items: &[String]) -> String {
    let inner: Vec<String> = items
        .iter()
        .map(|s| serde_json::to_string(s).unwrap())
        .collect();
    format!("[{}]", inner.join(","))
}

fn num_list(items: &[f64]) -> String {
    let inner: Vec<String> = items.iter().map(|&v| num(v)).collect();
    format!("[{}]", inner.join(","))
}

pub fn route_json(r: &IdentificationResult) -> String {
    let mut fields = Vec::new();
    match &r.route {
        TauRoute::Structural => fields.push("\"kind\":\"structural\"".to_string()),
        TauRoute::Backdoor { adjustment } => {
            fields.push("\"kind\":\"backdoor\"".to_string());
            fields.push(format!("\"adjustment\":{}", str_list(adjustment)));
        }
        TauRoute::ConditionalIv {
            instrument,
            conditioning,
        } => {
            fields.push("\"kind\":\"conditional_iv\"".to_string());
            fields.push(format!(
                "\"instrument\":{}",
                serde_json::to_string(instrument).unwrap()
            ));
            fields.push(format!("\"conditioning\":{}", str_list(conditioning)));
        }
        TauRoute::Unidentified => fields.push("\"kind\":\"unidentified\"".to_string()),
    }
    if let Some(tau) = r.tau {
        fields.push(format!("\"tau\":{}", num(tau)));
    }
    format!("{{{}}}", fields.join(","))
}

fn plan_json(p: &Plan) -> String {
    format!(
        "{{\"x\":{},\"x0\":{},\"w\":{},\"a\":{}}}",
        serde_json::to_string(&p.x).unwrap(),
        num(p.x0),
        str_list(&p.covariates),
        num_list(&p.coefficients)
    )
}

fn matrix_json(m: &cfsem::nalgebra::DMatrix<f64>) -> String {
    let rows: Vec<String> = (0..m.nrows())
        .map(|i| {
            let row: Vec<f64> = (0..m.ncols()).map(|j| m[(i, j)]).collect();
            num_list(&row)
        })
        .collect();
    format!("[{}]", rows.join(","))
}

pub fn query_result_json(q: &ParsedQuery, outcome: &QueryOutcome) -> String {
    let echo = serde_json::to_string(&q.raw).unwrap();
    match outcome {
        QueryOutcome::Counterfactual { result, plan } => {
            counterfactual_json(&echo, result, plan.as_ref(), &[])
        }
        QueryOutcome::Identified(route) => {
            format!(
                "{{\"query_echo\":{echo},\"route\":{},\"warnings\":[]}}",
                route_json(route)
            )
        }
        QueryOutcome::Ranking(entries) => {
            let rendered: Vec<String> = entries
                .iter()
                .map(|e| match &e.outcome {
                    RankOutcome::Ranked { score } => format!(
                        "{{\"covariates\":{},\"score\":{}}}",
                        str_list(&e.covariates),
                        num(*score)
                    ),
                    RankOutcome::Skipped { reason } => format!(
                        "{{\"covariates\":{},\"skipped\":\"{}\"}}",
                        str_list(&e.covariates),
                        error_class(reason)
                    ),
                })
                .collect();
            format!(
                "{{\"query_echo\":{echo},\"ranking\":[{}],\"warnings\":[]}}",
                rendered.join(",")
            )
        }
    }
}

pub fn counterfactual_json(
    echo: &str,
    result: &CounterfactualResult,
    plan: Option<&Plan>,
    warnings: &[String],
) -> String {
    let mut fields = vec![
        format!("\"query_echo\":{echo}"),
        format!("\"route\":{}", route_json(&result.route)),
        format!("\"y_mean\":{}", num(result.y_mean)),
        format!("\"y_var\":{}", num(result.y_var)),
    ];
    if let Some(p) = plan {
        fields.push(format!("\"plan\":{}", plan_json(p)));
    }
    if let Some(cross) = &result.residual_cross_cov {
        fields.push(format!("\"residual_cross_cov\":{}", matrix_json(cross)));
    }
    fields.push(format!(
        "\"moment_error\":{{\"mean\":{},\"var\":{}}}",
        num(result.moment_error.mean),
        num(result.moment_error.var)
    ));
    let warn: Vec<String> = warnings
        .iter()
        .map(|w| serde_json::to_string(w).unwrap())
        .collect();
    fields.push(format!("\"warnings\":[{}]", warn.join(",")));
    format!("{{{}}}", fields.join(","))
}

pub fn oracle_comparison_json(
    echo: &str,
    result: &CounterfactualResult,
    est: &cfsem::oracle::McEstimate,
    pass: bool,
) -> String {
    format!(
        "{{\"query_echo\":{echo},\
          \"engine\":{{\"y_mean\":{},\"y_var\":{}}},\
          \"oracle\":{{\"mean\":{},\"variance\":{},\"mean_se\":{},\"variance_se\":{},\
                      \"n_kept\":{},\"attempts\":{},\"acceptance_rate\":{},\"acceptance_se\":{}}},\
          \"pass\":{pass}}}",
        num(result.y_mean),
        num(result.y_var),
        num(est.mean),
        num(est.variance),
        num(est.mean_se),
        num(est.variance_se),
        est.n_kept,
        est.attempts,
        num(est.acceptance_rate),
        num(est.acceptance_se),
    )
}
