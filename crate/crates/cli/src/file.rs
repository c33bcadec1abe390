//! Market description files: JSON documents with exact decimal or rational
//! strings for every number.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use illiquid::costs::{
    build_order_book, constraint_matrix, market_value_cost, parse_order_book_csv, scaled_convex_cost, AnalyticComponent,
    AnalyticCost, MaxLinearCost, OrderBookSide,
};
use illiquid::kernel::{HalfSpace, PolyhedralCone, PolyhedralSet, ScalarPwl, SeparableCost};
use illiquid::market::{AdaptedProcess, EventTree, MarketInstance, NodeCost, NodeSpec};
use illiquid::num::{from_f64, parse_ext, parse_rat, ExtReal, Rat};

use crate::CliError;

/// Key that applies a cost or constraint to every node without its own entry.
pub const ALL_NODES: &str = "*";

/// A number as written in the file. Plain JSON numbers are binary floats and
/// are only accepted when float input is explicitly allowed.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Num {
    Text(String),
    Float(f64),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketFile {
    pub assets: Vec<String>,
    pub tree: TreeSpec,
    pub costs: BTreeMap<String, CostSpec>,
    #[serde(default)]
    pub constraints: BTreeMap<String, ConstraintSpec>,
    #[serde(default)]
    pub claims: BTreeMap<String, BTreeMap<String, Num>>,
    #[serde(default)]
    pub deflators: BTreeMap<String, DeflatorSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeSpec {
    pub nodes: Vec<NodeEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeEntry {
    pub id: String,
    #[serde(default)]
    pub parent: Option<String>,
    pub time: usize,
    /// Unconditional probability of reaching the node.
    pub probability: Num,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PwlSpec {
    #[serde(default)]
    pub lo: Option<Num>,
    #[serde(default)]
    pub hi: Option<Num>,
    #[serde(default)]
    pub knots: Vec<Num>,
    pub slopes: Vec<Num>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum BookSpec {
    Levels(BookLevels),
    Csv(BookCsv),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BookLevels {
    #[serde(default)]
    pub bids: Vec<(Num, Num)>,
    #[serde(default)]
    pub asks: Vec<(Num, Num)>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BookCsv {
    /// Path relative to the market file.
    pub csv: String,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum ComponentSpec {
    Exponential(ExponentialSpec),
    Pwl(PwlSpec),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentialSpec {
    pub sbar: Num,
    pub illiquidity: Num,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostSpec {
    Linear { prices: Vec<Num> },
    BidAsk { bid: Vec<Num>, ask: Vec<Num> },
    OrderBook { books: Vec<BookSpec> },
    ScaledConvex { prices: Vec<Num>, phi: Vec<PwlSpec> },
    MarketValue { prices: Vec<Num>, phi: Vec<PwlSpec> },
    SetValued { vertices: Vec<Vec<Num>> },
    Exponential { components: Vec<ComponentSpec> },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowSpec {
    pub normal: Vec<Num>,
    pub offset: Num,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConeSpec {
    #[serde(default)]
    pub generators: Option<Vec<Vec<Num>>>,
    #[serde(default)]
    pub inequalities: Option<Vec<Vec<Num>>>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConstraintSpec {
    None,
    Halfspaces { rows: Vec<RowSpec> },
    Cone { cone: ConeSpec },
    MatrixCone { matrix: Vec<Vec<Num>>, cone: ConeSpec },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeflatorSpec {
    pub y: BTreeMap<String, Num>,
    #[serde(default)]
    pub s: Option<BTreeMap<String, Vec<Num>>>,
}

/// Deflator process with optional shadow prices.
pub type NamedDeflator = (AdaptedProcess<Rat>, Option<AdaptedProcess<Vec<Rat>>>);

/// A parsed and validated market file.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub instance: MarketInstance,
    pub claims: BTreeMap<String, AdaptedProcess<Rat>>,
    pub deflators: BTreeMap<String, NamedDeflator>,
    /// SHA-256 of the file bytes.
    pub digest: String,
}

struct Ctx<'a> {
    allow_float: bool,
    dir: &'a Path,
}

fn input(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

impl Ctx<'_> {
    fn rat(&self, n: &Num, what: &str) -> Result<Rat, CliError> {
        match n {
            Num::Text(s) => parse_rat(s).map_err(|e| input(format!("{what}: {e}"))),
            Num::Float(x) if self.allow_float => from_f64(*x).ok_or_else(|| input(format!("{what}: {x} is not finite"))),
            Num::Float(x) => Err(input(format!(
                "{what}: bare number {x} is a binary float; write it as a string or pass --float-input"
            ))),
        }
    }

    fn ext(&self, n: &Num, what: &str) -> Result<ExtReal, CliError> {
        match n {
            Num::Text(s) => parse_ext(s).map_err(|e| input(format!("{what}: {e}"))),
            Num::Float(_) => self.rat(n, what).map(ExtReal::Finite),
        }
    }

    fn rats(&self, v: &[Num], what: &str) -> Result<Vec<Rat>, CliError> {
        v.iter().enumerate().map(|(i, n)| self.rat(n, &format!("{what}[{i}]"))).collect()
    }

    fn matrix(&self, rows: &[Vec<Num>], what: &str) -> Result<Vec<Vec<Rat>>, CliError> {
        rows.iter().enumerate().map(|(i, r)| self.rats(r, &format!("{what}[{i}]"))).collect()
    }

    fn pwl(&self, p: &PwlSpec, what: &str) -> Result<ScalarPwl, CliError> {
        let lo = p.lo.as_ref().map(|n| self.rat(n, &format!("{what}.lo"))).transpose()?;
        let hi = p.hi.as_ref().map(|n| self.rat(n, &format!("{what}.hi"))).transpose()?;
        let knots = self.rats(&p.knots, &format!("{what}.knots"))?;
        let slopes = self.rats(&p.slopes, &format!("{what}.slopes"))?;
        ScalarPwl::new(lo, hi, knots, slopes).map_err(|e| input(format!("{what}: {e}")))
    }

    fn book_side(&self, levels: &[(Num, Num)], what: &str) -> Result<OrderBookSide, CliError> {
        let levels = levels
            .iter()
            .enumerate()
            .map(|(i, (p, d))| Ok((self.rat(p, &format!("{what}[{i}].price"))?, self.ext(d, &format!("{what}[{i}].depth"))?)))
            .collect::<Result<Vec<_>, CliError>>()?;
        Ok(OrderBookSide::new(levels))
    }

    fn book(&self, b: &BookSpec, what: &str) -> Result<ScalarPwl, CliError> {
        let (bids, asks) = match b {
            BookSpec::Levels(l) => (self.book_side(&l.bids, &format!("{what}.bids"))?, self.book_side(&l.asks, &format!("{what}.asks"))?),
            BookSpec::Csv(c) => {
                let path = self.dir.join(&c.csv);
                let text = std::fs::read_to_string(&path).map_err(|e| input(format!("{what}: cannot read {}: {e}", path.display())))?;
                parse_order_book_csv(&text).map_err(|e| input(format!("{what}: {}: {e}", path.display())))?
            }
        };
        build_order_book(&bids, &asks).map_err(|e| input(format!("{what}: {e}")))
    }

    fn cone(&self, c: &ConeSpec, dim: usize, what: &str) -> Result<PolyhedralSet, CliError> {
        let cone = match (&c.generators, &c.inequalities) {
            (Some(g), None) => PolyhedralCone::Generators {
                dim,
                rays: self.matrix(g, &format!("{what}.generators"))?,
            },
            (None, Some(h)) => PolyhedralCone::Inequalities {
                dim,
                rows: self.matrix(h, &format!("{what}.inequalities"))?,
            },
            _ => return Err(input(format!("{what}: give exactly one of generators or inequalities"))),
        };
        let rows = match &cone {
            PolyhedralCone::Generators { rays: v, .. } | PolyhedralCone::Inequalities { rows: v, .. } => v,
        };
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(input(format!("{what}: vector of length {} in a cone of dimension {dim}", r.len())));
        }
        PolyhedralSet::from_cone(&cone).map_err(|e| input(format!("{what}: {e}")))
    }

    fn cost(&self, spec: &CostSpec, what: &str) -> Result<NodeCost, CliError> {
        let err = |e: &dyn std::fmt::Display| input(format!("{what}: {e}"));
        Ok(match spec {
            CostSpec::Linear { prices } => illiquid::costs::linear_cost(&self.rats(prices, &format!("{what}.prices"))?).into(),
            CostSpec::BidAsk { bid, ask } => {
                let (b, a) = (self.rats(bid, &format!("{what}.bid"))?, self.rats(ask, &format!("{what}.ask"))?);
                illiquid::costs::bid_ask_cost(&b, &a).map_err(|e| err(&e))?.into()
            }
            CostSpec::OrderBook { books } => SeparableCost::new(
                books
                    .iter()
                    .enumerate()
                    .map(|(j, b)| self.book(b, &format!("{what}.books[{j}]")))
                    .collect::<Result<_, _>>()?,
            )
            .into(),
            CostSpec::ScaledConvex { prices, phi } | CostSpec::MarketValue { prices, phi } => {
                let s = self.rats(prices, &format!("{what}.prices"))?;
                let phi = phi
                    .iter()
                    .enumerate()
                    .map(|(j, p)| self.pwl(p, &format!("{what}.phi[{j}]")))
                    .collect::<Result<Vec<_>, _>>()?;
                let c = if matches!(spec, CostSpec::ScaledConvex { .. }) {
                    scaled_convex_cost(&s, &phi)
                } else {
                    market_value_cost(&s, &phi)
                };
                c.map_err(|e| err(&e))?.into()
            }
            CostSpec::SetValued { vertices } => {
                MaxLinearCost::new(self.matrix(vertices, &format!("{what}.vertices"))?).map_err(|e| err(&e))?.into()
            }
            CostSpec::Exponential { components } => AnalyticCost::new(
                components
                    .iter()
                    .enumerate()
                    .map(|(j, c)| {
                        let w = format!("{what}.components[{j}]");
                        match c {
                            ComponentSpec::Exponential(e) => AnalyticComponent::exponential(
                                self.rat(&e.sbar, &format!("{w}.sbar"))?,
                                self.rat(&e.illiquidity, &format!("{w}.illiquidity"))?,
                            )
                            .map_err(|e| input(format!("{w}: {e}"))),
                            ComponentSpec::Pwl(p) => Ok(AnalyticComponent::Pwl(self.pwl(p, &w)?)),
                        }
                    })
                    .collect::<Result<_, _>>()?,
            )
            .into(),
        })
    }

    fn constraint(&self, spec: &ConstraintSpec, dim: usize, what: &str) -> Result<PolyhedralSet, CliError> {
        match spec {
            ConstraintSpec::None => Ok(PolyhedralSet::whole(dim)),
            ConstraintSpec::Halfspaces { rows } => {
                let rows = rows
                    .iter()
                    .enumerate()
                    .map(|(i, r)| {
                        let w = format!("{what}.rows[{i}]");
                        Ok(HalfSpace {
                            normal: self.rats(&r.normal, &format!("{w}.normal"))?,
                            offset: self.rat(&r.offset, &format!("{w}.offset"))?,
                        })
                    })
                    .collect::<Result<Vec<_>, CliError>>()?;
                PolyhedralSet::new(dim, rows).map_err(|e| input(format!("{what}: {e}")))
            }
            ConstraintSpec::Cone { cone } => self.cone(cone, dim, &format!("{what}.cone")),
            ConstraintSpec::MatrixCone { matrix, cone } => {
                let m = self.matrix(matrix, &format!("{what}.matrix"))?;
                if m.iter().any(|r| r.len() != dim) {
                    return Err(input(format!("{what}.matrix: every row needs {dim} entries")));
                }
                let k = self.cone(cone, m.len(), &format!("{what}.cone"))?;
                constraint_matrix(&m, &k).map_err(|e| input(format!("{what}: {e}")))
            }
        }
    }
}

/// Looks up the entry of every node, falling back to the `*` entry.
fn per_node<'a, T>(tree: &EventTree, map: &'a BTreeMap<String, T>, what: &str, default: Option<&'a T>) -> Result<Vec<Option<&'a T>>, CliError> {
    if let Some(k) = map.keys().find(|k| k.as_str() != ALL_NODES && tree.find(k).is_none()) {
        return Err(input(format!("{what}: unknown node {k:?}")));
    }
    let fallback = map.get(ALL_NODES).or(default);
    Ok(tree
        .ids()
        .map(|n| map.get(&tree.node(n).label).or(fallback))
        .collect())
}

fn scalar_process(ctx: &Ctx<'_>, tree: &EventTree, values: &BTreeMap<String, Num>, what: &str) -> Result<AdaptedProcess<Rat>, CliError> {
    let entries = per_node(tree, values, what, None)?;
    let mut out = Vec::with_capacity(tree.len());
    for (n, v) in tree.ids().zip(entries) {
        let label = &tree.node(n).label;
        let v = v.ok_or_else(|| input(format!("{what}: missing value for node {label:?}")))?;
        out.push(ctx.rat(v, &format!("{what}.{label}"))?);
    }
    Ok(AdaptedProcess::new(out))
}

/// Parses file contents; `dir` resolves relative order-book paths.
pub fn parse(text: &str, dir: &Path, allow_float: bool) -> Result<Loaded, CliError> {
    let file: MarketFile = serde_json::from_str(text).map_err(|e| input(e.to_string()))?;
    let ctx = Ctx { allow_float, dir };
    let index: BTreeMap<&str, usize> = file.tree.nodes.iter().enumerate().map(|(i, n)| (n.id.as_str(), i)).collect();
    let specs = file
        .tree
        .nodes
        .iter()
        .map(|n| {
            let parent = match &n.parent {
                Some(p) => Some(*index.get(p.as_str()).ok_or_else(|| input(format!("tree: node {:?} has unknown parent {p:?}", n.id)))?),
                None => None,
            };
            Ok(NodeSpec {
                label: n.id.clone(),
                parent,
                probability: ctx.rat(&n.probability, &format!("tree.{}.probability", n.id))?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let tree = EventTree::new(specs).map_err(|e| input(format!("tree: {e}")))?;
    for entry in &file.tree.nodes {
        let id = tree.find(&entry.id).expect("labels survive tree construction");
        if tree.node(id).time != entry.time {
            return Err(input(format!("tree: node {:?} declares time {} but sits at depth {}", entry.id, entry.time, tree.node(id).time)));
        }
    }

    let dim = file.assets.len();
    let costs = per_node(&tree, &file.costs, "costs", None)?
        .into_iter()
        .zip(tree.ids())
        .map(|(spec, n)| {
            let label = &tree.node(n).label;
            let spec = spec.ok_or_else(|| input(format!("costs: missing cost for node {label:?}")))?;
            ctx.cost(spec, &format!("costs.{label}"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let unconstrained = ConstraintSpec::None;
    let constraints = per_node(&tree, &file.constraints, "constraints", Some(&unconstrained))?
        .into_iter()
        .zip(tree.ids())
        .map(|(spec, n)| ctx.constraint(spec.expect("default present"), dim, &format!("constraints.{}", tree.node(n).label)))
        .collect::<Result<Vec<_>, _>>()?;
    let instance = MarketInstance::new(tree, file.assets, AdaptedProcess::new(costs), AdaptedProcess::new(constraints))
        .map_err(|e| input(e.to_string()))?;
    let tree = &instance.tree;

    let claims = file
        .claims
        .iter()
        .map(|(name, values)| Ok((name.clone(), scalar_process(&ctx, tree, values, &format!("claims.{name}"))?)))
        .collect::<Result<_, CliError>>()?;
    let mut deflators = BTreeMap::new();
    for (name, d) in &file.deflators {
        let what = format!("deflators.{name}");
        let y = scalar_process(&ctx, tree, &d.y, &format!("{what}.y"))?;
        let s = match &d.s {
            Some(s) => {
                let entries = per_node(tree, s, &format!("{what}.s"), None)?;
                let mut out = Vec::with_capacity(tree.len());
                for (n, v) in tree.ids().zip(entries) {
                    let label = &tree.node(n).label;
                    let v = v.ok_or_else(|| input(format!("{what}.s: missing prices for node {label:?}")))?;
                    let v = ctx.rats(v, &format!("{what}.s.{label}"))?;
                    if v.len() != dim {
                        return Err(input(format!("{what}.s.{label}: expected {dim} prices, found {}", v.len())));
                    }
                    out.push(v);
                }
                Some(AdaptedProcess::new(out))
            }
            None => None,
        };
        deflators.insert(name.clone(), (y, s));
    }
    Ok(Loaded {
        instance,
        claims,
        deflators,
        digest: String::new(),
    })
}

pub fn load(path: &Path, allow_float: bool) -> Result<Loaded, CliError> {
    use sha2::{Digest, Sha256};
    let bytes = std::fs::read(path).map_err(|e| input(format!("cannot read {}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| input(format!("{} is not UTF-8: {e}", path.display())))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut loaded = parse(text, dir, allow_float)?;
    loaded.digest = hex::encode(Sha256::digest(&bytes));
    Ok(loaded)
}
