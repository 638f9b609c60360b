//! Stock input files: every kind emits schema files that re-parse and pass
//! their validators.

use std::collections::BTreeMap;

use crate::error::{EngineError, Result};
use crate::groupoid::FiniteGroupoid;
use crate::schema::{
    AlgebroidSchema, EhresmannSchema, FinRepSchema, FiniteGroupoidSchema, SmoothModelSchema,
};

pub const KINDS: &[&str] = &[
    "sl2",
    "abelian-n",
    "heisenberg",
    "pair-finite-n",
    "pair-chart-n",
    "matrix-heisenberg",
];

/// Produces the named example as a list of `(file name, JSON text)` pairs.
/// `param` supplies the `n` of the parametrized kinds (default 3 or 4).
pub fn generate_example(kind: &str, param: Option<usize>) -> Result<Vec<(String, String)>> {
    match kind {
        "sl2" => {
            let mut brackets = BTreeMap::new();
            brackets.insert("0,1".to_string(), single("1", "2"));
            brackets.insert("0,2".to_string(), single("2", "-2"));
            brackets.insert("1,2".to_string(), single("0", "1"));
            let schema = AlgebroidSchema {
                base: "point".into(),
                rank: 3,
                chart_dim: 0,
                anchor: Vec::new(),
                brackets,
            };
            Ok(vec![("sl2.json".into(), pretty(&schema)?)])
        }
        "so3" => {
            let mut brackets = BTreeMap::new();
            brackets.insert("0,1".to_string(), single("2", "1"));
            brackets.insert("1,2".to_string(), single("0", "1"));
            brackets.insert("2,0".to_string(), single("1", "1"));
            let schema = AlgebroidSchema {
                base: "point".into(),
                rank: 3,
                chart_dim: 0,
                anchor: Vec::new(),
                brackets,
            };
            Ok(vec![("so3.json".into(), pretty(&schema)?)])
        }
        "abelian-n" => {
            let n = param.unwrap_or(3);
            let schema = AlgebroidSchema {
                base: "point".into(),
                rank: n,
                chart_dim: 0,
                anchor: Vec::new(),
                brackets: BTreeMap::new(),
            };
            Ok(vec![(format!("abelian{n}.json"), pretty(&schema)?)])
        }
        "heisenberg" => {
            let mut brackets = BTreeMap::new();
            brackets.insert("0,1".to_string(), single("2", "1"));
            let schema = AlgebroidSchema {
                base: "point".into(),
                rank: 3,
                chart_dim: 0,
                anchor: Vec::new(),
                brackets,
            };
            Ok(vec![("heisenberg.json".into(), pretty(&schema)?)])
        }
        "pair-finite-n" => {
            let n = param.unwrap_or(4);
            let g = std::sync::Arc::new(FiniteGroupoid::pair(n));
            let schema = FiniteGroupoidSchema::from_model(&g);
            // companion demo representation: a gauge transform of a genuine
            // one, carrying a nonzero arity-2 structure map
            let rep = demo_gauge_rep(&g, 2024);
            let rep_schema = FinRepSchema::from_rep(&rep);
            Ok(vec![
                (format!("pair{n}.json"), pretty(&schema)?),
                ("gauge_demo.json".into(), pretty(&rep_schema)?),
            ])
        }
        "pair-chart-n" => {
            let n = param.unwrap_or(1);
            let model = SmoothModelSchema {
                model: "pair-chart".into(),
                chart_dim: n,
                n: 0,
                dim: 0,
                basis: Vec::new(),
            };
            // the quadratic splitting used throughout the verification suite
            let mut lambda = vec![vec![String::new(); n]; n];
            for (r, row) in lambda.iter_mut().enumerate() {
                for (c, entry) in row.iter_mut().enumerate() {
                    *entry = if r == c {
                        if r == 0 {
                            "1 + (p0 - q0)^2".to_string()
                        } else {
                            "1".to_string()
                        }
                    } else {
                        "0".to_string()
                    };
                }
            }
            let conn = EhresmannSchema { lambda };
            Ok(vec![
                (format!("pair_r{n}.json"), pretty(&model)?),
                ("lambda_quadratic.json".into(), pretty(&conn)?),
            ])
        }
        "matrix-heisenberg" => {
            let schema = SmoothModelSchema {
                model: "matrix-heisenberg".into(),
                chart_dim: 0,
                n: 0,
                dim: 0,
                basis: Vec::new(),
            };
            Ok(vec![("matrix_heisenberg.json".into(), pretty(&schema)?)])
        }
        other => Err(EngineError::Schema(format!("unknown kind `{other}`"))),
    }
}

fn single(k: &str, v: &str) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    m.insert(k.to_string(), v.to_string());
    m
}

fn pretty<T: serde::Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

/// The demo representation shipped next to the pair groupoid files: a
/// genuine representation on a two-step bundle, gauge-transformed by a
/// seeded morphism with a nonzero arity-1 component.
pub fn demo_gauge_rep(
    g: &std::sync::Arc<FiniteGroupoid>,
    seed: u64,
) -> crate::groupoid::rep::FinRepG {
    use crate::graded::GradedSpace;
    use crate::groupoid::cochain::novars;
    use crate::groupoid::rep::{gauge_transform_fin, FinEndCochain, FinMorphismG, FinRepG};
    use crate::poly::Poly;
    use crate::polyops::{GradedPolyMap, PolyMat};
    use crate::samples::SamplePool;

    let bundle = GradedSpace::new([(0, 2), (1, 2)]);
    let mut del = GradedPolyMap::zero(novars(), bundle.clone(), bundle.clone(), 1);
    let mut b = PolyMat::zero(novars(), 2, 2);
    b.set(0, 0, Poly::one(novars()));
    del.set_block(0, b).unwrap();
    let id = GradedPolyMap::identity(novars(), &bundle);
    let base = FinRepG::genuine(g.clone(), bundle.clone(), del, |_| id.clone()).unwrap();

    let mut pool = SamplePool::new(seed);
    let mut phi = FinMorphismG::identity(&base);
    let mut phi1 = FinEndCochain::zero(g, bundle.clone(), bundle.clone(), -1, 1);
    for (pos, t) in g.tuples(1).iter().enumerate() {
        if g.is_unit(t[0]) {
            continue;
        }
        let mut m = GradedPolyMap::zero(novars(), bundle.clone(), bundle.clone(), -1);
        let mut block = PolyMat::zero(novars(), 2, 2);
        for r in 0..2 {
            for c in 0..2 {
                block.set(r, c, Poly::constant(novars(), pool.rat()));
            }
        }
        m.set_block(1, block).unwrap();
        phi1.set_at(pos, m);
    }
    phi.phis.push(phi1);
    gauge_transform_fin(&base, &phi, 5).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema;

    #[test]
    fn every_kind_roundtrips() {
        for kind in KINDS {
            let files = generate_example(kind, None).unwrap();
            assert!(!files.is_empty());
            for (name, text) in &files {
                // each file must parse in one of the schema types and its
                // validator must pass
                if name.contains("pair_r") || name.contains("matrix_") {
                    let s: schema::SmoothModelSchema = serde_json::from_str(text).unwrap();
                    s.to_model().unwrap();
                } else if name.contains("lambda") {
                    let s: schema::EhresmannSchema = serde_json::from_str(text).unwrap();
                    let model = crate::groupoid::SmoothModel::pair(1);
                    s.to_connection(&model).unwrap();
                } else if name.contains("gauge_demo") {
                    let s: schema::FinRepSchema = serde_json::from_str(text).unwrap();
                    let g = std::sync::Arc::new(FiniteGroupoid::pair(4));
                    let rep = s.to_rep(&g).unwrap();
                    assert!(crate::groupoid::rep::check_rep_g_fin(&rep, 3)
                        .unwrap()
                        .passed());
                } else if name.contains("pair") {
                    let s: schema::FiniteGroupoidSchema = serde_json::from_str(text).unwrap();
                    s.to_model().unwrap();
                } else {
                    let s: schema::AlgebroidSchema = serde_json::from_str(text).unwrap();
                    let model = s.to_model().unwrap();
                    assert!(crate::algebroid::check_algebroid(&model).unwrap().passed());
                }
            }
        }
    }

    #[test]
    fn unknown_kind_is_an_error() {
        assert!(generate_example("nope", None).is_err());
    }

    #[test]
    fn pair_finite_counts() {
        let files = generate_example("pair-finite-n", Some(4)).unwrap();
        let (_, text) = files.iter().find(|(n, _)| n.starts_with("pair4")).unwrap();
        let s: schema::FiniteGroupoidSchema = serde_json::from_str(text).unwrap();
        assert_eq!(s.objects, 4);
        assert_eq!(s.arrows.len(), 16);
    }
}
