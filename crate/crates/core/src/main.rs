//! Batch front end: parse model and representation schemas, dispatch the
//! verification suites and cohomology computations, emit human-readable and
//! JSON reports. Exit status is zero exactly when every check passes.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};

use homotopy_rep::algebroid::{
    build_adjoint, check_algebroid, check_rep, deformation_cohomology, TMConnection,
};
use homotopy_rep::error::Result;
use homotopy_rep::graded::GradedSpace;
use homotopy_rep::groupoid::cochain::{delta_fin, delta_smooth, star_fin, star_smooth};
use homotopy_rep::groupoid::nerve::{elementary_quasi_iso, elementary_pointwise_quasi_iso, flat_star_homotopy, ElementaryStructure};
use homotopy_rep::groupoid::rep::{
    apply_d_fin, check_morphism_g_fin, check_rep_g_fin, check_rep_g_smooth, cohomology_g_fin,
    FinElement,
};
use homotopy_rep::groupoid::SmoothModel;
use homotopy_rep::report::{CheckEntry, Report};
use homotopy_rep::samples::SamplePool;
use homotopy_rep::schema::{
    adjoint_rep_from_schemas, read_json, AlgebroidSchema, ConnectionSchema, EhresmannSchema,
    ElementarySchema, FinRepSchema, FiniteGroupoidSchema, SmoothModelSchema,
};
use homotopy_rep::van_est::{
    check_ad_equals_ad, check_chain_map, differentiate_morphism, differentiate_rep, lemma_suite,
    random_normalized_scalar,
};

#[derive(Parser)]
#[command(name = "homotopy-rep", version, about = "Exact engine for representations up to homotopy of Lie algebroids and groupoids")]
struct Cli {
    /// Write the machine-readable report to this path.
    #[arg(long, global = true)]
    json: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Verify the axioms of an algebroid model.
    CheckAlgebroid {
        #[arg(long)]
        algebra: PathBuf,
    },
    /// Cohomology of a Lie algebra with adjoint or trivial coefficients.
    Cohomology {
        #[arg(long)]
        algebra: PathBuf,
        #[arg(long, default_value = "adjoint")]
        coeff: String,
        #[arg(long, default_value_t = 3)]
        max_degree: i64,
    },
    /// Build the adjoint representation of an algebroid and verify its
    /// structure equations at seeded sample points.
    AdjointClosure {
        #[arg(long)]
        algebra: PathBuf,
        #[arg(long)]
        conn: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        bound: usize,
    },
    /// Cochain algebra checks: delta squared and the Leibniz rule, either
    /// exhaustively on a finite groupoid or at sampled tuples on a smooth
    /// model with seeded polynomial cochains.
    DgaCheck {
        #[arg(long)]
        groupoid: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        arity: usize,
        #[arg(long, default_value_t = 3)]
        degree: u32,
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Verify the structure equations of a finite representation, and that
    /// its differential squares to zero on normalized basis cochains.
    CheckGroupoidRep {
        #[arg(long)]
        groupoid: PathBuf,
        #[arg(long)]
        rep: PathBuf,
        #[arg(long, default_value_t = 4)]
        bound: usize,
        #[arg(long, default_value_t = 0)]
        d_squared_degree: i64,
    },
    /// Elementary reduction: the morphism onto the two-term model and its
    /// pointwise cohomology comparison.
    ElementaryQiso {
        #[arg(long)]
        groupoid: PathBuf,
        #[arg(long)]
        rep: PathBuf,
        #[arg(long)]
        elementary: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        bound: usize,
    },
    /// The contracting-homotopy identity on the nerve rows.
    HomotopyCheck {
        #[arg(long)]
        groupoid: PathBuf,
        #[arg(long, default_value_t = 2)]
        max_m: usize,
        #[arg(long, default_value_t = 2)]
        max_k: usize,
    },
    /// Differentiation intertwines the simplicial and Koszul differentials
    /// on seeded polynomial cochains.
    VanEstChainMap {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 2)]
        max_arity: usize,
        #[arg(long, default_value_t = 3)]
        degree: u32,
        #[arg(long, default_value_t = 3)]
        count: usize,
        #[arg(long, default_value_t = 10)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Full differentiation verification of the adjoint representation:
    /// upstairs structure equations, downstairs structure equations after
    /// differentiation, morphism differentiation, and the componentwise
    /// comparison with the adjoint of the induced connection.
    VanEstVerify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        conn: PathBuf,
        #[arg(long, default_value_t = 5)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// The itemized flow-operator identities at seeded samples.
    LemmaSuite {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Cohomology of the normalized and the full complexes must agree.
    NormalizedVsFull {
        #[arg(long)]
        groupoid: PathBuf,
        #[arg(long)]
        rep: PathBuf,
        #[arg(long, default_value_t = 3)]
        max_degree: i64,
    },
    /// Emit stock input files.
    GenerateExample {
        #[arg(long)]
        kind: String,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => std::process::exit(0),
        Ok(false) => std::process::exit(1),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    let start = Instant::now();
    let report = dispatch(&cli.command)?;
    print!("{}", report.render_human());
    eprintln!("elapsed: {:.3}s", start.elapsed().as_secs_f64());
    if let Some(path) = &cli.json {
        homotopy_rep::schema::write_json(path, &report)?;
    }
    Ok(report.passed())
}

fn dispatch(cmd: &Command) -> Result<Report> {
    match cmd {
        Command::CheckAlgebroid { algebra } => {
            let schema: AlgebroidSchema = read_json(algebra)?;
            let model = schema.to_model()?;
            let r = check_algebroid(&model)?;
            let mut report = Report::new("check-algebroid", None);
            report.push_bool(
                "algebroid axioms",
                r.passed(),
                format!("{:?}", r.failures.first()),
            );
            Ok(report)
        }
        Command::Cohomology {
            algebra,
            coeff,
            max_degree,
        } => {
            let schema: AlgebroidSchema = read_json(algebra)?;
            let model = schema.to_model()?;
            let mut report = Report::new("cohomology", None);
            match coeff.as_str() {
                "adjoint" => {
                    let c = deformation_cohomology(&model, *max_degree)?;
                    report.push(CheckEntry::pass("deformation cohomology computed"));
                    report.set_cohomology(c);
                }
                "trivial" => {
                    // trivial coefficients: a rank-one bundle with no action
                    let rep = homotopy_rep::algebroid::RepA {
                        algebroid: model.clone(),
                        bundle: GradedSpace::concentrated(0, 1),
                        del: homotopy_rep::polyops::GradedPolyMap::zero(
                            model.vars().clone(),
                            GradedSpace::concentrated(0, 1),
                            GradedSpace::concentrated(0, 1),
                            1,
                        ),
                        conn: (0..model.rank())
                            .map(|_| {
                                homotopy_rep::polyops::GradedPolyMap::zero(
                                    model.vars().clone(),
                                    GradedSpace::concentrated(0, 1),
                                    GradedSpace::concentrated(0, 1),
                                    0,
                                )
                            })
                            .collect(),
                        omegas: Default::default(),
                    };
                    let complex =
                        homotopy_rep::algebroid::flatten_complex(&rep, *max_degree, 0)?;
                    let c = complex.cohomology(0, *max_degree)?;
                    report.push(CheckEntry::pass("Lie algebra cohomology computed"));
                    report.set_cohomology(c);
                }
                other => {
                    report.push(CheckEntry::fail(
                        "coefficients",
                        format!("unknown coefficient system `{other}`"),
                    ));
                }
            }
            Ok(report)
        }
        Command::AdjointClosure {
            algebra,
            conn,
            samples,
            seed,
            bound,
        } => {
            let schema: AlgebroidSchema = read_json(algebra)?;
            let model = schema.to_model()?;
            let nabla = match conn {
                Some(path) => {
                    let cs: ConnectionSchema = read_json(path)?;
                    cs.to_connection(&model)?
                }
                None => TMConnection::flat(&model),
            };
            let rep = build_adjoint(&model, &nabla)?;
            let mut pool = SamplePool::new(*seed);
            let pts = pool.points(*samples, model.chart_dim());
            let r = check_rep(&rep, &pts, *bound)?;
            let mut report = Report::new("adjoint-closure", Some(*seed));
            report.push_bool(
                "adjoint structure equations",
                r.passed(),
                format!("{:?}", r.failures.first()),
            );
            Ok(report)
        }
        Command::DgaCheck {
            groupoid,
            model,
            arity,
            degree,
            samples,
            seed,
        } => {
            let mut report = Report::new("dga-check", Some(*seed));
            if let Some(path) = groupoid {
                let schema: FiniteGroupoidSchema = read_json(path)?;
                let g = schema.to_model()?;
                let mut pool = SamplePool::new(*seed);
                for k in 0..=*arity {
                    let f = homotopy_rep::groupoid::cochain::FinCochain::scalar(
                        g.clone(),
                        k,
                        |_| pool.rat(),
                    );
                    let dd = delta_fin(&delta_fin(&f)?)?;
                    report.push_bool(format!("delta^2 = 0 at arity {k}"), dd.is_zero(), "nonzero");
                }
                for (kf, kh) in [(0usize, 1usize), (1, 1), (1, 2), (2, 1), (2, 2)] {
                    if kf + kh + 1 > *arity + 1 {
                        continue;
                    }
                    let f = homotopy_rep::groupoid::cochain::FinCochain::scalar(
                        g.clone(),
                        kf,
                        |_| pool.rat(),
                    );
                    let h = homotopy_rep::groupoid::cochain::FinCochain::scalar(
                        g.clone(),
                        kh,
                        |_| pool.rat(),
                    );
                    let lhs = delta_fin(&star_fin(&f, &h)?)?;
                    let mut rhs = star_fin(&delta_fin(&f)?, &h)?;
                    let mut second = star_fin(&f, &delta_fin(&h)?)?;
                    if kf % 2 == 1 {
                        second = second.scale_rat(&-homotopy_rep::scalar::rat_int(1));
                    }
                    rhs = rhs.add(&second)?;
                    let diff = lhs.add(&rhs.scale_rat(&-homotopy_rep::scalar::rat_int(1)))?;
                    report.push_bool(
                        format!("Leibniz at arities ({kf},{kh})"),
                        diff.is_zero(),
                        "nonzero",
                    );
                }
            }
            if let Some(path) = model {
                let schema: SmoothModelSchema = read_json(path)?;
                let m = schema.to_model()?;
                let mut pool = SamplePool::new(*seed);
                for (kf, kh) in [(1usize, 1usize), (1, 2), (2, 1)] {
                    let f = random_normalized_scalar(&m, kf, *degree, &mut pool);
                    let h = random_normalized_scalar(&m, kh, *degree, &mut pool);
                    let lhs = delta_smooth(&star_smooth(&f, &h)?)?;
                    let mut rhs = star_smooth(&delta_smooth(&f)?, &h)?;
                    let mut second = star_smooth(&f, &delta_smooth(&h)?)?;
                    if kf % 2 == 1 {
                        second = second.scale_rat(&-homotopy_rep::scalar::rat_int(1));
                    }
                    rhs = rhs.add(&second)?;
                    let diff = lhs.add(&rhs.scale_rat(&-homotopy_rep::scalar::rat_int(1)))?;
                    let mut ok = diff.is_zero();
                    // exactness certified symbolically; also sample per spec
                    for _ in 0..*samples {
                        let pt = m.sample_tuple(&mut pool, kf + kh + 1);
                        ok = ok
                            && diff
                                .eval(&pt)?
                                .iter()
                                .all(|(_, v)| v.iter().all(num_traits::Zero::is_zero));
                    }
                    report.push_bool(
                        format!("smooth Leibniz at arities ({kf},{kh})"),
                        ok,
                        "nonzero",
                    );
                    let ddf = delta_smooth(&delta_smooth(&f)?)?;
                    report.push_bool(
                        format!("smooth delta^2 at arity {kf}"),
                        ddf.is_zero(),
                        "nonzero",
                    );
                }
            }
            Ok(report)
        }
        Command::CheckGroupoidRep {
            groupoid,
            rep,
            bound,
            d_squared_degree,
        } => {
            let gs: FiniteGroupoidSchema = read_json(groupoid)?;
            let g = gs.to_model()?;
            let rs: FinRepSchema = read_json(rep)?;
            let rep = rs.to_rep(&g)?;
            let r = check_rep_g_fin(&rep, *bound)?;
            let mut report = Report::new("check-groupoid-rep", None);
            report.push_bool(
                format!("structure equations through arity {bound}"),
                r.passed(),
                format!("{:?}", r.failures.first()),
            );
            if *d_squared_degree > 0 {
                let ok = d_squared_on_normalized_basis(&rep, *d_squared_degree)?;
                report.push_bool(
                    format!("D^2 = 0 on normalized cochains of total degree <= {d_squared_degree}"),
                    ok,
                    "nonzero square",
                );
            }
            Ok(report)
        }
        Command::ElementaryQiso {
            groupoid,
            rep,
            elementary,
            bound,
        } => {
            let gs: FiniteGroupoidSchema = read_json(groupoid)?;
            let g = gs.to_model()?;
            let rs: FinRepSchema = read_json(rep)?;
            let rep = rs.to_rep(&g)?;
            let elem = match elementary {
                Some(path) => {
                    let es: ElementarySchema = read_json(path)?;
                    ElementaryStructure {
                        fibration: es.fibration,
                        section: es.section,
                    }
                }
                None => ElementaryStructure {
                    fibration: vec![0; g.n_objects],
                    section: vec![0],
                },
            };
            let (phi, target) = elementary_quasi_iso(&g, &elem, &rep, *bound)?;
            let mut report = Report::new("elementary-qiso", None);
            let r = check_rep_g_fin(&target, *bound)?;
            report.push_bool("two-term target is a representation", r.passed(), "fails");
            let m = check_morphism_g_fin(&phi, &rep, &target, *bound)?;
            report.push_bool(
                format!("morphism equations through arity {bound}"),
                m.passed(),
                format!("{:?}", m.failures.first()),
            );
            let q = elementary_pointwise_quasi_iso(&g, &phi, &rep, &target)?;
            report.push_bool("pointwise cohomology isomorphism", q, "some fiber fails");
            Ok(report)
        }
        Command::HomotopyCheck {
            groupoid,
            max_m,
            max_k,
        } => {
            let gs: FiniteGroupoidSchema = read_json(groupoid)?;
            let g = gs.to_model()?;
            let bundle = GradedSpace::concentrated(0, 1);
            let mut report = Report::new("homotopy-check", None);
            for m in 0..=*max_m {
                for k in 0..=*max_k {
                    let r = flat_star_homotopy(&g, &bundle, m, k)?;
                    report.push_bool(
                        format!("b*s* + s*b* = id at (m,k)=({m},{k})"),
                        r.passed(),
                        format!("{:?}", r.failures.first()),
                    );
                }
            }
            Ok(report)
        }
        Command::VanEstChainMap {
            model,
            max_arity,
            degree,
            count,
            samples,
            seed,
        } => {
            let schema: SmoothModelSchema = read_json(model)?;
            let m = schema.to_model()?;
            let mut pool = SamplePool::new(*seed);
            let mut cochains = Vec::new();
            for arity in 1..=*max_arity {
                for _ in 0..*count {
                    cochains.push(random_normalized_scalar(&m, arity, *degree, &mut pool));
                }
            }
            let pts = pool.points(*samples, m.algebroid_rank());
            let r = check_chain_map(&m, &cochains, &pts)?;
            let mut report = Report::new("van-est-chain-map", Some(*seed));
            report.push_bool(
                "Psi intertwines the differentials",
                r.passed(),
                format!("{:?}", r.failures.first()),
            );
            Ok(report)
        }
        Command::VanEstVerify {
            model,
            conn,
            samples,
            seed,
        } => {
            let ms: SmoothModelSchema = read_json(model)?;
            let es: EhresmannSchema = read_json(conn)?;
            let (m, c, rep) = adjoint_rep_from_schemas(&ms, &es)?;
            let mut pool = SamplePool::new(*seed);
            let mut report = Report::new("van-est-verify", Some(*seed));
            let upstairs = check_rep_g_smooth(&rep, 5, &mut pool, *samples)?;
            report.push_bool(
                "adjoint representation upstairs",
                upstairs.passed(),
                format!("{:?}", upstairs.failures.first()),
            );
            let downstairs = differentiate_rep(&rep)?;
            let pts = pool.points(*samples, m.algebroid_rank().min(8));
            let chart_pts = pool.points(*samples, match m.as_ref() {
                SmoothModel::Pair(p) => p.chart_dim,
                SmoothModel::Matrix(_) => 0,
            });
            let r = check_rep(&downstairs, &chart_pts, 5)?;
            report.push_bool(
                "differentiated representation downstairs",
                r.passed(),
                format!("{:?}", r.failures.first()),
            );
            let _ = pts;
            // morphism differentiation: identity and a scalar gauge
            for (name, phi) in [
                ("identity morphism", homotopy_rep::groupoid::rep::SmoothMorphismG::identity(&rep)),
                (
                    "scalar gauge morphism",
                    homotopy_rep::groupoid::rep::SmoothMorphismG::scalar(
                        &rep,
                        &homotopy_rep::scalar::rat_int(2),
                    ),
                ),
            ] {
                let dphi = differentiate_morphism(&phi, &rep, &rep)?;
                let mr = homotopy_rep::algebroid::check_morphism_a(
                    &dphi,
                    &downstairs,
                    &downstairs,
                    &chart_pts,
                    3,
                )?;
                report.push_bool(
                    format!("differentiated {name}"),
                    mr.passed(),
                    format!("{:?}", mr.failures.first()),
                );
            }
            if matches!(m.as_ref(), SmoothModel::Pair(_)) {
                let cr = check_ad_equals_ad(&m, &c, &chart_pts)?;
                report.push_bool(
                    "differentiated adjoint equals adjoint of induced connection",
                    cr.passed(),
                    format!("{:?}", cr.failures.first()),
                );
            }
            Ok(report)
        }
        Command::LemmaSuite { model, seed } => {
            let schema: SmoothModelSchema = read_json(model)?;
            let m = schema.to_model()?;
            let suite = lemma_suite(&m, *seed)?;
            let mut report = Report::new("lemma-suite", Some(*seed));
            for (name, ok) in suite.items {
                report.push_bool(name, ok, "identity fails");
            }
            Ok(report)
        }
        Command::NormalizedVsFull {
            groupoid,
            rep,
            max_degree,
        } => {
            let gs: FiniteGroupoidSchema = read_json(groupoid)?;
            let g = gs.to_model()?;
            let rs: FinRepSchema = read_json(rep)?;
            let rep = rs.to_rep(&g)?;
            let n = cohomology_g_fin(&rep, *max_degree, true)?;
            let f = cohomology_g_fin(&rep, *max_degree, false)?;
            let mut report = Report::new("normalized-vs-full", None);
            report.push_bool(
                "normalized and full cohomology agree",
                n.dims() == f.dims(),
                format!("normalized {:?} vs full {:?}", n.dims(), f.dims()),
            );
            report.set_cohomology(n);
            Ok(report)
        }
        Command::GenerateExample { kind, n, out } => {
            let files = homotopy_rep::examples_gen::generate_example(kind, *n)?;
            std::fs::create_dir_all(out)?;
            let mut report = Report::new("generate-example", None);
            for (name, text) in files {
                let path = out.join(&name);
                std::fs::write(&path, text)?;
                report.push(CheckEntry::pass(format!("wrote {}", path.display())));
            }
            Ok(report)
        }
    }
}

/// `D^2 = 0` on every normalized basis cochain of total degree at most the
/// bound.
fn d_squared_on_normalized_basis(
    rep: &homotopy_rep::groupoid::rep::FinRepG,
    max_total: i64,
) -> Result<bool> {
    let g = rep.groupoid.clone();
    let lo = rep.bundle.min_degree().unwrap_or(0);
    for arity in 0..=((max_total - lo).max(0) as usize) {
        for l in rep.bundle.degrees() {
            if arity as i64 + l > max_total {
                continue;
            }
            let list: Vec<usize> = if arity == 0 {
                (0..g.n_objects).collect()
            } else {
                g.tuples(arity)
                    .iter()
                    .enumerate()
                    .filter(|(_, t)| !g.tuple_has_unit(t))
                    .map(|(p, _)| p)
                    .collect()
            };
            for raw in list {
                for c in 0..rep.bundle.dim(l) {
                    let mut eta = homotopy_rep::groupoid::cochain::FinCochain::zero(
                        g.clone(),
                        rep.bundle.clone(),
                        arity,
                    );
                    let mut v = eta.at(raw).clone();
                    v.set(l, c, homotopy_rep::poly::Poly::one(homotopy_rep::groupoid::cochain::novars()));
                    eta.set_at(raw, v);
                    let e = FinElement::from_cochain(eta);
                    let dd = apply_d_fin(rep, &apply_d_fin(rep, &e)?)?;
                    if !dd.is_zero() {
                        return Ok(false);
                    }
                }
            }
        }
    }
    Ok(true)
}
