//! JSON rendering of verdicts and certificates. Numbers are written as exact
//! rational strings and processes as objects keyed by node label, so equal
//! inputs give byte-identical reports.

use serde_json::{json, Map, Value};

use illiquid::analysis::DeflatorResiduals;
use illiquid::market::{AdaptedProcess, BudgetReport, EventTree};
use illiquid::num::{parse_ext, parse_rat, ExtReal, Rat};

use crate::CliError;

pub fn rat(r: &Rat) -> Value {
    Value::String(r.to_string())
}

pub fn ext(r: &ExtReal) -> Value {
    Value::String(r.to_string())
}

pub fn vector(v: &[Rat]) -> Value {
    Value::Array(v.iter().map(rat).collect())
}

pub fn process<T>(tree: &EventTree, p: &AdaptedProcess<T>, f: impl Fn(&T) -> Value) -> Value {
    let map: Map<String, Value> = p.iter().map(|(n, v)| (tree.node(n).label.clone(), f(v))).collect();
    Value::Object(map)
}

pub fn scalars(tree: &EventTree, p: &AdaptedProcess<Rat>) -> Value {
    process(tree, p, rat)
}

pub fn vectors(tree: &EventTree, p: &AdaptedProcess<Vec<Rat>>) -> Value {
    process(tree, p, |v| vector(v))
}

pub fn budget(tree: &EventTree, r: &BudgetReport) -> Value {
    let per_node: Map<String, Value> = tree
        .ids()
        .map(|n| {
            let e = &r.residuals[n.0];
            let v = json!({"lo": ext(&e.lo), "hi": ext(&e.hi), "in_constraints": r.in_constraints[n.0]});
            (tree.node(n).label.clone(), v)
        })
        .collect();
    json!({
        "feasibility": format!("{:?}", r.feasibility()).to_lowercase(),
        "liquidated": r.liquidated,
        "max_residual": ext(&r.max_residual()),
        "nodes": per_node,
    })
}

pub fn deflator_residuals(tree: &EventTree, r: &DeflatorResiduals) -> Value {
    let per_node: Map<String, Value> = tree
        .ids()
        .map(|n| (tree.node(n).label.clone(), json!({"price": ext(&r.price[n.0]), "cone": ext(&r.cone[n.0])})))
        .collect();
    json!({
        "valid": r.is_valid(),
        "positive": r.positive,
        "normalized": r.normalized,
        "max": ext(&r.max()),
        "nodes": per_node,
    })
}

fn field<'a>(v: &'a Value, key: &str) -> Result<&'a Value, CliError> {
    v.get(key).ok_or_else(|| CliError::Input(format!("report has no field {key:?}")))
}

pub fn read_rat(v: &Value, what: &str) -> Result<Rat, CliError> {
    let s = v.as_str().ok_or_else(|| CliError::Input(format!("{what}: expected a string")))?;
    parse_rat(s).map_err(|e| CliError::Input(format!("{what}: {e}")))
}

pub fn read_ext(v: &Value, what: &str) -> Result<ExtReal, CliError> {
    let s = v.as_str().ok_or_else(|| CliError::Input(format!("{what}: expected a string")))?;
    parse_ext(s).map_err(|e| CliError::Input(format!("{what}: {e}")))
}

fn read_node<'a>(tree: &EventTree, obj: &'a Value, n: illiquid::market::NodeId, what: &str) -> Result<&'a Value, CliError> {
    let label = &tree.node(n).label;
    obj.get(label).ok_or_else(|| CliError::Input(format!("{what}: no entry for node {label:?}")))
}

pub fn read_scalars(tree: &EventTree, v: &Value, what: &str) -> Result<AdaptedProcess<Rat>, CliError> {
    let values = tree
        .ids()
        .map(|n| read_rat(read_node(tree, v, n, what)?, what))
        .collect::<Result<_, _>>()?;
    Ok(AdaptedProcess::new(values))
}

pub fn read_vectors(tree: &EventTree, v: &Value, what: &str) -> Result<AdaptedProcess<Vec<Rat>>, CliError> {
    let values = tree
        .ids()
        .map(|n| {
            let arr = read_node(tree, v, n, what)?
                .as_array()
                .ok_or_else(|| CliError::Input(format!("{what}: expected an array")))?;
            arr.iter().map(|x| read_rat(x, what)).collect()
        })
        .collect::<Result<_, _>>()?;
    Ok(AdaptedProcess::new(values))
}

/// Certificate object of a report, or `None` when it is null or absent.
pub fn certificate(report: &Value) -> Result<Option<&Value>, CliError> {
    Ok(Some(field(report, "certificate")?).filter(|c| !c.is_null()))
}

pub fn string_field<'a>(v: &'a Value, key: &str) -> Result<&'a str, CliError> {
    field(v, key)?
        .as_str()
        .ok_or_else(|| CliError::Input(format!("report field {key:?} is not a string")))
}

pub fn object_field<'a>(v: &'a Value, key: &str) -> Result<&'a Value, CliError> {
    field(v, key)
}
