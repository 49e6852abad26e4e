//! Query JSON: schema, validation, and dispatch onto the engine.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use cfsem::{CounterfactualResult, Engine, Evidence, IdentificationResult, Plan};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryFile {
    pub x: String,
    pub y: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<PlanSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimize_over: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub identify: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence: Option<EvidenceSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSpec {
    pub x0: f64,
    pub w: Vec<String>,
    pub a: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct EvidenceSpec {
    #[serde(default)]
    pub point: BTreeMap<String, f64>,
    #[serde(default)]
    pub r#box: BTreeMap<String, (Bound, Bound)>,
}

/// A finite number or the strings "-inf" / "inf".
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bound {
    Number(f64),
    Named(String),
}

impl Bound {
    pub fn value(&self) -> Result<f64, String> {
        match self {
            Bound::Number(v) => Ok(*v),
            Bound::Named(s) => match s.as_str() {
                "inf" | "+inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(format!("ParseError: unknown bound `{other}`")),
            },
        }
    }
}

/// What a query asks for.
pub enum QueryKind {
    Identify,
    Intervene { x0: f64 },
    Point { x0: f64 },
    BoxPlan { plan: Plan },
    Plan { plan: Plan },
    Optimal { w: Vec<String>, x0: f64 },
    Rank { candidates: Vec<Vec<String>> },
}

pub struct ParsedQuery {
    pub raw: serde_json::Value,
    pub x: String,
    pub y: String,
    pub evidence: Evidence,
    pub kind: QueryKind,
}

pub fn parse(text: &str) -> Result<ParsedQuery, String> {
    let raw: serde_json::Value =
        serde_json::from_str(text).map_err(|e| format!("ParseError: {e}"))?;
    let q: QueryFile =
        serde_json::from_value(raw.clone()).map_err(|e| format!("ParseError: {e}"))?;

    let mut evidence = Evidence::empty();
    let mut has_box = false;
    if let Some(spec) = &q.evidence {
        for (v, val) in &spec.point {
            evidence = evidence.and_point(v, *val);
        }
        for (v, (lo, hi)) in &spec.r#box {
            evidence = evidence.and_box(v, lo.value()?, hi.value()?);
            has_box = true;
        }
    }

    let mut modes = 0;
    modes += usize::from(q.identify.unwrap_or(false));
    modes += usize::from(q.rank.is_some());
    modes += usize::from(q.optimize_over.is_some());
    modes += usize::from(q.plan.is_some());
    let plain_x0 = q.x0.is_some() && q.optimize_over.is_none();
    modes += usize::from(plain_x0);
    if modes != 1 {
        return Err(
            "ParseError: give exactly one of `x0`, `plan`, `optimize_over`, `rank`, `identify: true`"
                .to_string(),
        );
    }

    let kind = if q.identify.unwrap_or(false) {
        QueryKind::Identify
    } else if let Some(c) = q.rank.clone() {
        QueryKind::Rank { candidates: c }
    } else if let Some(w) = q.optimize_over.clone() {
        QueryKind::Optimal {
            w,
            x0: q.x0.unwrap_or(0.0),
        }
    } else if let Some(p) = q.plan.clone() {
        let w: Vec<&str> = p.w.iter().map(String::as_str).collect();
        QueryKind::Plan {
            plan: Plan::conditional(&q.x, p.x0, &w, &p.a),
        }
    } else {
        let x0 = q.x0.unwrap();
        if has_box {
            QueryKind::BoxPlan {
                plan: Plan::unconditional(&q.x, x0),
            }
        } else if evidence.is_empty() {
            QueryKind::Intervene { x0 }
        } else {
            QueryKind::Point { x0 }
        }
    };

    Ok(ParsedQuery {
        raw,
        x: q.x,
        y: q.y,
        evidence,
        kind,
    })
}

/// A query's engine-side outcome.
pub enum QueryOutcome {
    Counterfactual {
        result: CounterfactualResult,
        plan: Option<Plan>,
    },
    Identified(IdentificationResult),
    Ranking(Vec<cfsem::engine::CovariateRanking>),
}

pub fn run(engine: &Engine, q: &ParsedQuery) -> Result<QueryOutcome, cfsem::Error> {
    match &q.kind {
        QueryKind::Identify => Ok(QueryOutcome::Identified(engine.identify(&q.x, &q.y)?)),
        QueryKind::Intervene { x0 } => Ok(QueryOutcome::Counterfactual {
            result: engine.intervene(&q.x, &q.y, *x0)?,
            plan: None,
        }),
        QueryKind::Point { x0 } => Ok(QueryOutcome::Counterfactual {
            result: engine.counterfactual_point(&q.evidence, &q.x, &q.y, *x0)?,
            plan: None,
        }),
        QueryKind::BoxPlan { plan } | QueryKind::Plan { plan } => {
            Ok(QueryOutcome::Counterfactual {
                result: engine.counterfactual_plan(&q.evidence, plan, &q.y)?,
                plan: Some(plan.clone()),
            })
        }
        QueryKind::Optimal { w, x0 } => {
            let refs: Vec<&str> = w.iter().map(String::as_str).collect();
            let (plan, result) = engine.optimal_plan(&q.evidence, &refs, &q.x, &q.y, *x0)?;
            Ok(QueryOutcome::Counterfactual {
                result,
                plan: Some(plan),
            })
        }
        QueryKind::Rank { candidates } => Ok(QueryOutcome::Ranking(
            engine.rank_covariate_sets(&q.evidence, candidates, &q.x, &q.y)?,
        )),
    }
}

/// The plan a Monte Carlo check should simulate for this query.
pub fn oracle_plan(q: &ParsedQuery, outcome: &QueryOutcome) -> Option<Plan> {
    match (&q.kind, outcome) {
        (QueryKind::Identify, _) | (QueryKind::Rank { .. }, _) => None,
        (QueryKind::Intervene { x0 } | QueryKind::Point { x0 }, _) => {
            Some(Plan::unconditional(&q.x, *x0))
        }
        (QueryKind::BoxPlan { plan } | QueryKind::Plan { plan }, _) => Some(plan.clone()),
        (QueryKind::Optimal { .. }, QueryOutcome::Counterfactual { plan, .. }) => plan.clone(),
        _ => None,
    }
}
