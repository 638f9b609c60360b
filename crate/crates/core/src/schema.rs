//! JSON input schemas for the batch front end. Rationals and polynomials
//! travel as strings in the infix grammar; all indices are zero-based.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::algebroid::{AlgebroidModel, TMConnection};
use crate::error::{EngineError, Result};
use crate::graded::GradedSpace;
use crate::groupoid::cochain::novars;
use crate::groupoid::rep::{EhresmannConn, FinEndCochain, FinRepG, SmoothRepG};
use crate::groupoid::{Arrow, FiniteGroupoid, SmoothModel};
use crate::poly::{parse_poly, var_set, Poly, VarSet};
use crate::polyops::{GradedPolyMap, PolyMat};

fn chart_vars(n: usize) -> VarSet {
    var_set((0..n).map(|j| format!("x{j}")).collect())
}

fn arrow_vars(n: usize) -> VarSet {
    let mut names: Vec<String> = (0..n).map(|j| format!("p{j}")).collect();
    names.extend((0..n).map(|j| format!("q{j}")));
    var_set(names)
}

// ---------------------------------------------------------------------------
// Algebroids
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AlgebroidSchema {
    pub base: String,
    pub rank: usize,
    #[serde(default)]
    pub chart_dim: usize,
    /// `anchor[i][j]`: the `d/dx_j` component of the anchor of frame `i`.
    #[serde(default)]
    pub anchor: Vec<Vec<String>>,
    /// `brackets["i,j"]["k"]`: the `e_k` component of `[e_i, e_j]`.
    #[serde(default)]
    pub brackets: BTreeMap<String, BTreeMap<String, String>>,
}

fn parse_pair_key(key: &str) -> Result<(usize, usize)> {
    let parts: Vec<&str> = key.split(',').collect();
    if parts.len() != 2 {
        return Err(EngineError::Schema(format!("bad bracket key `{key}`")));
    }
    let i = parts[0].trim().parse().map_err(|_| {
        EngineError::Schema(format!("bad bracket key `{key}`"))
    })?;
    let j = parts[1].trim().parse().map_err(|_| {
        EngineError::Schema(format!("bad bracket key `{key}`"))
    })?;
    Ok((i, j))
}

impl AlgebroidSchema {
    pub fn to_model(&self) -> Result<Arc<AlgebroidModel>> {
        match self.base.as_str() {
            "point" => {
                let vars = var_set(Vec::new());
                let mut constants = Vec::new();
                for (key, comps) in &self.brackets {
                    let (i, j) = parse_pair_key(key)?;
                    for (k, val) in comps {
                        let k: usize = k.trim().parse().map_err(|_| {
                            EngineError::Schema(format!("bad component index `{k}`"))
                        })?;
                        let p = parse_poly(val, &vars)?;
                        constants.push(((i, j, k), p.constant_part()));
                    }
                }
                Ok(Arc::new(AlgebroidModel::point_base(self.rank, &constants)?))
            }
            "coord" => {
                let vars = chart_vars(self.chart_dim);
                let mut anchor = PolyMat::zero(vars.clone(), self.rank, self.chart_dim);
                if self.anchor.len() != self.rank {
                    return Err(EngineError::Schema("anchor row count".into()));
                }
                for (i, row) in self.anchor.iter().enumerate() {
                    if row.len() != self.chart_dim {
                        return Err(EngineError::Schema("anchor column count".into()));
                    }
                    for (j, s) in row.iter().enumerate() {
                        anchor.set(i, j, parse_poly(s, &vars)?);
                    }
                }
                let mut brackets = Vec::new();
                for (key, comps) in &self.brackets {
                    let (i, j) = parse_pair_key(key)?;
                    let mut v = vec![Poly::zero(vars.clone()); self.rank];
                    for (k, val) in comps {
                        let k: usize = k.trim().parse().map_err(|_| {
                            EngineError::Schema(format!("bad component index `{k}`"))
                        })?;
                        v[k] = parse_poly(val, &vars)?;
                    }
                    brackets.push(((i, j), v));
                }
                Ok(Arc::new(AlgebroidModel::coord_base(
                    vars, self.rank, anchor, &brackets,
                )?))
            }
            other => Err(EngineError::Schema(format!("unknown base `{other}`"))),
        }
    }
}

/// Bundle connection: one `rank x rank` matrix of polynomials per chart
/// direction.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConnectionSchema {
    #[serde(default)]
    pub gammas: Vec<Vec<Vec<String>>>,
}

impl ConnectionSchema {
    pub fn to_connection(&self, alg: &AlgebroidModel) -> Result<TMConnection> {
        if self.gammas.is_empty() {
            return Ok(TMConnection::flat(alg));
        }
        if self.gammas.len() != alg.chart_dim() {
            return Err(EngineError::Schema("one Christoffel matrix per chart direction".into()));
        }
        let mut gammas = Vec::new();
        for rows in &self.gammas {
            let mut m = PolyMat::zero(alg.vars().clone(), alg.rank(), alg.rank());
            for (r, row) in rows.iter().enumerate() {
                for (c, s) in row.iter().enumerate() {
                    m.set(r, c, parse_poly(s, alg.vars())?);
                }
            }
            gammas.push(m);
        }
        Ok(TMConnection { gammas })
    }
}

// ---------------------------------------------------------------------------
// Finite groupoids and their representations
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ArrowSchema {
    pub src: usize,
    pub tgt: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FiniteGroupoidSchema {
    pub objects: usize,
    pub arrows: Vec<ArrowSchema>,
    /// `comp[i][j]` is the arrow id of `g_i g_j`, or null when undefined.
    pub comp: Vec<Vec<Option<usize>>>,
    pub units: Vec<usize>,
    pub inv: Vec<usize>,
}

impl FiniteGroupoidSchema {
    pub fn to_model(&self) -> Result<Arc<FiniteGroupoid>> {
        Ok(Arc::new(FiniteGroupoid::new(
            self.objects,
            self.arrows
                .iter()
                .map(|a| Arrow {
                    src: a.src,
                    tgt: a.tgt,
                })
                .collect(),
            self.comp.clone(),
            self.units.clone(),
            self.inv.clone(),
        )?))
    }

    pub fn from_model(g: &FiniteGroupoid) -> Self {
        let n = g.n_arrows();
        FiniteGroupoidSchema {
            objects: g.n_objects,
            arrows: g
                .arrows
                .iter()
                .map(|a| ArrowSchema {
                    src: a.src,
                    tgt: a.tgt,
                })
                .collect(),
            comp: (0..n)
                .map(|i| (0..n).map(|j| g.compose(i, j)).collect())
                .collect(),
            units: g.units.clone(),
            inv: g.inv.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FinRepSchema {
    /// degree -> dimension
    pub bundle: BTreeMap<String, usize>,
    pub unital: bool,
    /// maps[k] is the arity-k structure map: keys are comma-separated arrow
    /// ids ("3,7"), or object ids at arity zero; values are per-source-degree
    /// rational matrices.
    pub maps: Vec<BTreeMap<String, BTreeMap<String, Vec<Vec<String>>>>>,
}

fn parse_degree(s: &str) -> Result<i64> {
    s.trim()
        .parse()
        .map_err(|_| EngineError::Schema(format!("bad degree `{s}`")))
}

impl FinRepSchema {
    pub fn to_rep(&self, g: &Arc<FiniteGroupoid>) -> Result<FinRepG> {
        let bundle = GradedSpace::new(
            self.bundle
                .iter()
                .map(|(d, dim)| Ok((parse_degree(d)?, *dim)))
                .collect::<Result<Vec<_>>>()?,
        );
        let novar = novars();
        let mut f = Vec::new();
        for (k, table) in self.maps.iter().enumerate() {
            let mut fk =
                FinEndCochain::zero(g, bundle.clone(), bundle.clone(), 1 - k as i64, k);
            let positions = g.tuple_positions(k.max(1));
            for (key, blocks) in table {
                let ids: Vec<usize> = key
                    .split(',')
                    .map(|s| {
                        s.trim()
                            .parse()
                            .map_err(|_| EngineError::Schema(format!("bad tuple key `{key}`")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let pos = if k == 0 {
                    if ids.len() != 1 || ids[0] >= g.n_objects {
                        return Err(EngineError::Schema(format!("bad object key `{key}`")));
                    }
                    ids[0]
                } else {
                    *positions
                        .get(&ids)
                        .ok_or_else(|| EngineError::Schema(format!("tuple `{key}` not composable")))?
                };
                let mut m =
                    GradedPolyMap::zero(novar.clone(), bundle.clone(), bundle.clone(), 1 - k as i64);
                for (deg, rows) in blocks {
                    let d = parse_degree(deg)?;
                    let (tr, sr) = (bundle.dim(d + 1 - k as i64), bundle.dim(d));
                    if rows.len() != tr || rows.iter().any(|r| r.len() != sr) {
                        return Err(EngineError::Schema(format!(
                            "block at degree {d} must be {tr}x{sr}"
                        )));
                    }
                    let mut block = PolyMat::zero(novar.clone(), tr, sr);
                    for (r, row) in rows.iter().enumerate() {
                        for (c, s) in row.iter().enumerate() {
                            block.set(r, c, parse_poly(s, &novar)?);
                        }
                    }
                    m.set_block(d, block)?;
                }
                fk.set_at(pos, m);
            }
            f.push(fk);
        }
        Ok(FinRepG {
            groupoid: g.clone(),
            bundle,
            f,
            unital: self.unital,
        })
    }

    pub fn from_rep(rep: &FinRepG) -> Self {
        let g = &rep.groupoid;
        let mut bundle = BTreeMap::new();
        for d in rep.bundle.degrees() {
            bundle.insert(d.to_string(), rep.bundle.dim(d));
        }
        let mut maps = Vec::new();
        for fk in &rep.f {
            let mut table: BTreeMap<String, BTreeMap<String, Vec<Vec<String>>>> = BTreeMap::new();
            let keys: Vec<(String, usize)> = if fk.arity == 0 {
                (0..g.n_objects).map(|x| (x.to_string(), x)).collect()
            } else {
                g.tuples(fk.arity)
                    .iter()
                    .enumerate()
                    .map(|(pos, t)| {
                        (
                            t.iter()
                                .map(|a| a.to_string())
                                .collect::<Vec<_>>()
                                .join(","),
                            pos,
                        )
                    })
                    .collect()
            };
            for (key, pos) in keys {
                let v = fk.at(pos);
                if v.is_zero() {
                    continue;
                }
                let mut blocks = BTreeMap::new();
                for (d, block) in v.blocks() {
                    let rows: Vec<Vec<String>> = (0..block.rows)
                        .map(|r| {
                            (0..block.cols)
                                .map(|c| {
                                    crate::scalar::rat_to_string(&block.at(r, c).constant_part())
                                })
                                .collect()
                        })
                        .collect();
                    blocks.insert(d.to_string(), rows);
                }
                table.insert(key, blocks);
            }
            maps.push(table);
        }
        FinRepSchema {
            bundle,
            unital: rep.unital,
            maps,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ElementarySchema {
    pub fibration: Vec<usize>,
    pub section: Vec<usize>,
}

// ---------------------------------------------------------------------------
// Smooth models and connections
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SmoothModelSchema {
    pub model: String,
    #[serde(default)]
    pub chart_dim: usize,
    #[serde(default)]
    pub n: usize,
    #[serde(default)]
    pub dim: usize,
    /// dense basis matrices, rational strings, row major
    #[serde(default)]
    pub basis: Vec<Vec<String>>,
}

impl SmoothModelSchema {
    pub fn to_model(&self) -> Result<Arc<SmoothModel>> {
        match self.model.as_str() {
            "pair-chart" => {
                if self.chart_dim == 0 {
                    return Err(EngineError::Schema("pair-chart needs chart_dim >= 1".into()));
                }
                Ok(SmoothModel::pair(self.chart_dim))
            }
            "matrix-heisenberg" => SmoothModel::heisenberg(),
            "matrix-additive" => SmoothModel::additive(self.n.max(1)),
            "matrix" => {
                let basis = self
                    .basis
                    .iter()
                    .map(|b| {
                        b.iter()
                            .map(|s| crate::scalar::parse_rat(s))
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Arc::new(SmoothModel::Matrix(
                    crate::groupoid::MatrixGroupModel::new(self.dim, basis)?,
                )))
            }
            other => Err(EngineError::Schema(format!("unknown model `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EhresmannSchema {
    /// n x n polynomial matrix in `p0..p{n-1}, q0..q{n-1}`; identity rows
    /// may be omitted by leaving the whole field empty for a matrix model.
    #[serde(default)]
    pub lambda: Vec<Vec<String>>,
}

impl EhresmannSchema {
    pub fn to_connection(&self, model: &SmoothModel) -> Result<EhresmannConn> {
        match model {
            SmoothModel::Matrix(_) => Ok(EhresmannConn::Trivial),
            SmoothModel::Pair(p) => {
                let n = p.chart_dim;
                if self.lambda.len() != n || self.lambda.iter().any(|r| r.len() != n) {
                    return Err(EngineError::Schema(format!("lambda must be {n}x{n}")));
                }
                let user = arrow_vars(n);
                let internal = model.arity_vars(1);
                // rename p*/q* into the tuple coordinates (x0_*, x1_*)
                let images: Vec<Poly> = (0..2 * n)
                    .map(|v| Poly::var(internal.clone(), v).unwrap())
                    .collect();
                let mut lambda = PolyMat::zero(internal.clone(), n, n);
                for (r, row) in self.lambda.iter().enumerate() {
                    for (c, s) in row.iter().enumerate() {
                        let p = parse_poly(s, &user)?;
                        lambda.set(r, c, p.subst_rat(internal.clone(), &images));
                    }
                }
                EhresmannConn::pair_from_lambda(model, lambda)
            }
        }
    }
}

/// Builds the adjoint representation directly from a model + connection
/// pair, the main smooth-representation input path of the CLI.
pub fn adjoint_rep_from_schemas(
    model_schema: &SmoothModelSchema,
    conn_schema: &EhresmannSchema,
) -> Result<(Arc<SmoothModel>, EhresmannConn, SmoothRepG)> {
    let model = model_schema.to_model()?;
    let conn = conn_schema.to_connection(&model)?;
    let rep = crate::groupoid::rep::build_ad_sigma(&model, &conn)?;
    Ok((model, conn, rep))
}

pub fn read_json<T: for<'a> Deserialize<'a>>(path: &std::path::Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_json<T: Serialize>(path: &std::path::Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algebroid_roundtrip() {
        let text = r#"{
            "base": "point", "rank": 3,
            "brackets": {"0,1": {"1": "2"}, "0,2": {"2": "-2"}, "1,2": {"0": "1"}}
        }"#;
        let schema: AlgebroidSchema = serde_json::from_str(text).unwrap();
        let model = schema.to_model().unwrap();
        assert!(crate::algebroid::check_algebroid(&model).unwrap().passed());
        let rep = crate::algebroid::deformation_cohomology(&model, 2).unwrap();
        assert_eq!(rep.dims(), vec![0, 0, 0]);
    }

    #[test]
    fn coord_algebroid_schema() {
        let text = r#"{
            "base": "coord", "rank": 2, "chart_dim": 2,
            "anchor": [["1", "0"], ["0", "1"]],
            "brackets": {}
        }"#;
        let schema: AlgebroidSchema = serde_json::from_str(text).unwrap();
        let model = schema.to_model().unwrap();
        assert!(crate::algebroid::check_algebroid(&model).unwrap().passed());
    }

    #[test]
    fn lambda_schema_renames_variables() {
        let text = r#"{"lambda": [["1 + (p0 - q0)^2"]]}"#;
        let schema: EhresmannSchema = serde_json::from_str(text).unwrap();
        let model = SmoothModel::pair(1);
        let conn = schema.to_connection(&model).unwrap();
        let rep = crate::groupoid::rep::build_ad_sigma(&model, &conn).unwrap();
        assert!(rep.f.len() > 2);
    }

    #[test]
    fn finite_rep_roundtrip() {
        let g = Arc::new(FiniteGroupoid::pair(2));
        let rep = FinRepG::trivial(g.clone());
        let schema = FinRepSchema::from_rep(&rep);
        let back = schema.to_rep(&g).unwrap();
        assert!(crate::groupoid::rep::check_rep_g_fin(&back, 3)
            .unwrap()
            .passed());
    }
}
