//! Machine-readable JSON reports.

use serde_json::{json, Value};

use crate::metrics::{MetricsReport, SetAccuracy};
use crate::repair::RepairResult;

fn ms(d: std::time::Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Everything except `timings_ms` depends only on the inputs.
pub fn repair_report(r: &RepairResult) -> Value {
    let delta = r.delta.as_deref();
    let changed: Vec<Value> = delta
        .map(|d| {
            d.iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, v)| json!({ "parameter": r.layout.name(r.layer, i), "delta": v }))
                .collect()
        })
        .unwrap_or_default();
    let stats = delta.map(|d| {
        json!({
            "parameters": d.len(),
            "nonzero": d.iter().filter(|v| **v != 0.0).count(),
            "l1": d.iter().map(|v| v.abs()).sum::<f64>(),
            "linf": d.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        })
    });
    json!({
        "status": r.status.name(),
        "layer": r.layer,
        "norm": r.norm.name(),
        "norm_value": r.norm_value,
        "key_point_count": r.key_point_count,
        "lp": { "variables": r.lp.num_vars(), "rows": r.lp.num_rows() },
        "delta_stats": stats,
        "changed_parameters": changed,
        "delta": delta,
        "timings_ms": {
            "regions": ms(r.timings.regions),
            "jacobians": ms(r.timings.jacobians),
            "lp": ms(r.timings.lp),
            "total": ms(r.timings.total),
        },
    })
}

fn set_json(s: &SetAccuracy) -> Value {
    json!({ "count": s.count, "buggy_accuracy": s.buggy, "repaired_accuracy": s.repaired })
}

pub fn metrics_report(m: &MetricsReport) -> Value {
    json!({
        "efficacy": m.efficacy,
        "drawdown": m.drawdown,
        "generalization": m.generalization,
        "repair_set": m.repair_set.as_ref().map(set_json),
        "drawdown_set": set_json(&m.drawdown_set),
        "generalization_set": set_json(&m.generalization_set),
    })
}

pub fn to_pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable value");
    s.push('\n');
    s
}
