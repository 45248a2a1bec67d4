mod io;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lipmix::acceptance::{criteria, run_criterion, CriterionResult};
use lipmix::constructions::{
    box_mixer, circle_local_mean, circle_local_mixer, cusp_jordan_local_mean, graph_mean_handle, median_mixer,
    Handle,
};
use lipmix::curve::{generate, CurveSpec, Generated, SampledCurve};
use lipmix::diameter::diameter;
use lipmix::estimators::{
    chain_components, doubling_estimate, lipschitz_handle, lipschitz_map, qh_profile, turning_constant,
    uniform_disconnectedness, Centers, DomainSampler, EstimateReport, LipOptions, QhPoint, TurningMode,
};
use lipmix::hyperspace::{hausdorff, mean_to_retraction, FiniteSubset, RetractionCheck, SubsetFile};
use lipmix::metric::{MapSample, MetricSpace, Norm, ProductSpace};
use lipmix::obstruction::{mean_lip_lower_bound, BasePoints};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::io::{
    domain, emit, load, parse_floats, parse_ids, parse_plane_points, read_json, relative_to, to_json, CliError,
    CliResult,
};

#[derive(Parser)]
#[command(name = "lipmix", version, about = "Lipschitz means and mixers on sampled metric curves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a curve or point set file
    Generate(GenerateArgs),
    /// Evaluate a mean or mixer on tuples of point ids
    Construct(ConstructArgs),
    /// Run an estimator and write its report
    Estimate(EstimateArgs),
    /// Hausdorff distances and retraction checks on finite subsets
    Hyperspace(HyperspaceArgs),
    /// Winding-number lower bound for Lipschitz means on a planar arc
    Obstruct(ObstructArgs),
    /// Run the verification suite
    Verify(VerifyArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// curve kind, e.g. circle, graph-curve, box-curve
    #[arg(long)]
    kind: Option<String>,
    /// full JSON spec, or @file
    #[arg(long, conflicts_with = "kind")]
    spec: Option<String>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    t_max: Option<f64>,
    /// comma-separated coordinates
    #[arg(long)]
    from: Option<String>,
    #[arg(long)]
    to: Option<String>,
    /// parabola, cusp, or a JSON table profile
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    extent: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// JSON spec of the base curve for power-image
    #[arg(long)]
    base: Option<String>,
    #[arg(long)]
    n_max: Option<u64>,
    #[arg(long)]
    per_circle: Option<u64>,
    #[arg(long)]
    per_gap: Option<u64>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    per_edge: Option<u64>,
    #[arg(long)]
    depth: Option<u64>,
    #[arg(long)]
    terms: Option<u64>,
    #[arg(long)]
    per_segment: Option<u64>,
    #[arg(long)]
    n_graph: Option<u64>,
    #[arg(long)]
    n_top: Option<u64>,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConstructKind {
    MedianMixer,
    GraphMean,
    CircleMixer,
    CircleMean,
    BoxMixer,
    CuspMean,
}

#[derive(Args)]
struct HandleArgs {
    /// arity of the graph mean
    #[arg(long, default_value_t = 2)]
    arity: usize,
    /// turning constant used to size circle domains
    #[arg(long, default_value_t = 1.0)]
    turning: f64,
}

#[derive(Args)]
struct ConstructArgs {
    #[arg(long, value_enum)]
    kind: ConstructKind,
    #[arg(long)]
    curve: PathBuf,
    /// JSON array of id tuples
    #[arg(long)]
    eval: PathBuf,
    #[command(flatten)]
    handle: HandleArgs,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum What {
    Lip,
    Turning,
    Chain,
    Unifdisc,
    Doubling,
    Qh,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long, value_enum)]
    what: What,
    #[arg(long)]
    curve: PathBuf,
    /// sampled map file, for lip and qh
    #[arg(long)]
    map: Option<PathBuf>,
    /// estimate the Lipschitz constant of a construction instead of a map file
    #[arg(long, value_enum)]
    kind: Option<ConstructKind>,
    #[command(flatten)]
    handle: HandleArgs,
    #[arg(long, default_value_t = 10_000)]
    budget: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    exhaustive: bool,
    /// comma-separated radii for doubling; default halves the diameter six times
    #[arg(long)]
    radii: Option<String>,
    #[arg(long, default_value_t = 4)]
    bins_per_decade: u32,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Op {
    Dist,
    RetractVerify,
}

#[derive(Args)]
struct HyperspaceArgs {
    #[arg(long, value_enum)]
    op: Op,
    #[arg(long)]
    curve: Option<PathBuf>,
    /// comma-separated member ids
    #[arg(long)]
    a: Option<String>,
    #[arg(long)]
    b: Option<String>,
    /// subset file; give twice for dist
    #[arg(long)]
    subset: Vec<PathBuf>,
    /// the mean behind the retraction
    #[arg(long, value_enum, default_value_t = ConstructKind::GraphMean)]
    kind: ConstructKind,
    #[command(flatten)]
    handle: HandleArgs,
    #[arg(long, default_value_t = 10_000)]
    budget: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    lip_budget: u64,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ObstructArgs {
    #[arg(long)]
    curve: PathBuf,
    /// "auto" or base points as x,y;x,y
    #[arg(long, default_value = "auto")]
    z0: String,
    /// number of automatic base points
    #[arg(long, default_value_t = 64)]
    cap: usize,
    #[arg(long, default_value_t = 100_000)]
    budget: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value = "paper")]
    suite: String,
    /// run a single criterion
    #[arg(long)]
    only: Option<u8>,
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Construct(a) => cmd_construct(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Hyperspace(a) => cmd_hyperspace(a),
        Command::Obstruct(a) => cmd_obstruct(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lipmix: {e}");
            ExitCode::from(e.code() as u8)
        }
    }
}

fn json_arg(s: &str) -> CliResult<Value> {
    let text = match s.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path).map_err(|e| CliError::Parse(format!("{path}: {e}")))?,
        None => s.to_string(),
    };
    serde_json::from_str(&text).map_err(|e| CliError::Parse(e.to_string()))
}

fn spec_from_flags(a: &GenerateArgs) -> CliResult<CurveSpec> {
    let value = match (&a.spec, &a.kind) {
        (Some(s), _) => json_arg(s)?,
        (None, Some(kind)) => {
            let mut m = Map::new();
            m.insert("kind".into(), json!(kind));
            let floats = [("r", a.r), ("t_max", a.t_max), ("extent", a.extent), ("alpha", a.alpha), ("t", a.t)];
            for (k, v) in floats {
                if let Some(v) = v {
                    m.insert(k.into(), json!(v));
                }
            }
            let ints = [
                ("n", a.n),
                ("n_max", a.n_max),
                ("per_circle", a.per_circle),
                ("per_gap", a.per_gap),
                ("per_edge", a.per_edge),
                ("depth", a.depth),
                ("terms", a.terms),
                ("per_segment", a.per_segment),
                ("n_graph", a.n_graph),
                ("n_top", a.n_top),
            ];
            for (k, v) in ints {
                if let Some(v) = v {
                    m.insert(k.into(), json!(v));
                }
            }
            for (k, v) in [("from", &a.from), ("to", &a.to)] {
                if let Some(v) = v {
                    m.insert(k.into(), json!(parse_floats(v)?));
                }
            }
            if let Some(p) = &a.profile {
                let v = if p.trim_start().starts_with(['{', '"']) { json_arg(p)? } else { json!(p) };
                m.insert("profile".into(), v);
            }
            if let Some(b) = &a.base {
                m.insert("base".into(), json_arg(b)?);
            }
            Value::Object(m)
        }
        (None, None) => return Err(CliError::Parse("generate needs --kind or --spec".into())),
    };
    serde_json::from_value(value).map_err(|e| CliError::Parse(format!("curve spec: {e}")))
}

fn cmd_generate(a: GenerateArgs) -> CliResult<()> {
    let spec = spec_from_flags(&a)?;
    let text = match generate(&spec).map_err(domain)? {
        Generated::Curve(c) => to_json(&c.to_file()),
        Generated::Space(s) => to_json(&s.to_file()),
    };
    emit(Some(&a.out), &text)
}

fn build_handle<'c>(kind: ConstructKind, c: &'c SampledCurve, h: &HandleArgs) -> CliResult<Handle<'c>> {
    match kind {
        ConstructKind::MedianMixer => median_mixer(c),
        ConstructKind::GraphMean => graph_mean_handle(c, h.arity),
        ConstructKind::CircleMixer => circle_local_mixer(c, h.turning),
        ConstructKind::CircleMean => circle_local_mean(c, h.turning),
        ConstructKind::BoxMixer => box_mixer(c),
        ConstructKind::CuspMean => cusp_jordan_local_mean(c),
    }
    .map_err(domain)
}

#[derive(Serialize)]
struct EvalRow {
    input: Vec<usize>,
    output: Vec<f64>,
}

fn cmd_construct(a: ConstructArgs) -> CliResult<()> {
    let loaded = load(&a.curve)?;
    let h = build_handle(a.kind, loaded.curve()?, &a.handle)?;
    let tuples: Vec<Vec<usize>> = read_json(&a.eval)?;
    let rows = tuples
        .into_iter()
        .map(|t| {
            let output = h.eval(&t).map_err(|e| CliError::Domain(format!("tuple {t:?}: {e}")))?;
            Ok(EvalRow { input: t, output })
        })
        .collect::<CliResult<Vec<_>>>()?;
    emit(a.out.as_deref(), &to_json(&rows))
}

#[derive(Deserialize)]
struct MapFile {
    #[serde(default = "euclidean")]
    codomain: Norm,
    pairs: Vec<MapPair>,
}

#[derive(Deserialize)]
struct MapPair {
    input: Vec<usize>,
    output: Vec<f64>,
}

fn euclidean() -> Norm {
    Norm::Euclidean
}

fn load_map<'a>(path: &Path, space: &'a MetricSpace) -> CliResult<MapSample<'a>> {
    let file: MapFile = read_json(path)?;
    let first = file.pairs.first().ok_or_else(|| CliError::Parse("map file has no pairs".into()))?;
    let (arity, dim) = (first.input.len(), first.output.len());
    let product = ProductSpace::power(space, arity).map_err(domain)?;
    let pairs = file.pairs.into_iter().map(|p| (p.input, p.output)).collect();
    MapSample::new(product, file.codomain, dim, pairs).map_err(domain)
}

fn report_csv(r: &EstimateReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let witness: Vec<String> = r.witness.iter().map(|i| i.to_string()).collect();
    w.write_record(["name", "value", "witness", "budget", "seed", "refinement"]).unwrap();
    w.write_record([
        r.name.clone(),
        r.value.to_string(),
        witness.join(" "),
        r.budget.to_string(),
        r.seed.to_string(),
        r.refinement.to_string(),
    ])
    .unwrap();
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

#[derive(Serialize)]
struct QhReport {
    name: &'static str,
    budget: u64,
    seed: u64,
    bins_per_decade: u32,
    points: Vec<QhPoint>,
}

fn cmd_estimate(a: EstimateArgs) -> CliResult<()> {
    let loaded = load(&a.curve)?;
    let space = loaded.space();
    let need_map = || a.map.as_deref().ok_or_else(|| CliError::Parse("this estimate needs --map".into()));
    let report = match a.what {
        What::Lip => match (&a.map, a.kind) {
            (Some(path), _) => lipschitz_map(&load_map(path, space)?, a.budget, a.seed, 1e-9).map_err(domain)?,
            (None, Some(kind)) => {
                let h = build_handle(kind, loaded.curve()?, &a.handle)?;
                let sampler = DomainSampler::for_handle(&h).map_err(domain)?;
                let opts = LipOptions { budget: a.budget, seed: a.seed, ..LipOptions::default() };
                lipschitz_handle(&h, &sampler, opts, &[]).map_err(domain)?
            }
            (None, None) => return Err(CliError::Parse("lip needs --map or --kind".into())),
        },
        What::Turning => {
            let mode = if a.exhaustive { TurningMode::Exhaustive } else { TurningMode::Budget(a.budget) };
            turning_constant(loaded.curve()?, mode, a.seed).map_err(domain)?
        }
        What::Chain => {
            let eps = a.eps.ok_or_else(|| CliError::Parse("chain needs --eps".into()))?;
            let comps = chain_components(space, eps).map_err(domain)?;
            EstimateReport {
                name: "chain-components".into(),
                value: comps.len() as f64,
                witness: comps.iter().map(|c| c[0]).collect(),
                budget: 0,
                seed: a.seed,
                refinement: space.len(),
                note: Some(format!("eps = {eps}")),
            }
        }
        What::Unifdisc => uniform_disconnectedness(space).map_err(domain)?,
        What::Doubling => {
            let radii = match &a.radii {
                Some(r) => parse_floats(r)?,
                None => {
                    let all: Vec<usize> = (0..space.len()).collect();
                    let d = diameter(space, &all);
                    (1..=6).map(|k| d / 2f64.powi(k)).collect()
                }
            };
            doubling_estimate(space, &radii, &Centers::Sampled { count: a.budget, seed: a.seed }).map_err(domain)?
        }
        What::Qh => {
            let m = load_map(need_map()?, space)?;
            let points = qh_profile(&m, a.budget, a.seed, a.bins_per_decade).map_err(domain)?;
            let text = match a.format {
                Format::Json => to_json(&QhReport {
                    name: "qh-profile",
                    budget: a.budget,
                    seed: a.seed,
                    bins_per_decade: a.bins_per_decade,
                    points,
                }),
                Format::Csv => {
                    let mut w = csv::Writer::from_writer(Vec::new());
                    w.write_record(["t_in", "t_out"]).unwrap();
                    for p in &points {
                        w.write_record([p.t_in.to_string(), p.t_out.to_string()]).unwrap();
                    }
                    String::from_utf8(w.into_inner().unwrap()).unwrap()
                }
            };
            return emit(a.out.as_deref(), &text);
        }
    };
    let text = match a.format {
        Format::Json => to_json(&report),
        Format::Csv => report_csv(&report),
    };
    emit(a.out.as_deref(), &text)
}

#[derive(Serialize)]
struct DistReport {
    hausdorff: f64,
    a: Vec<usize>,
    b: Vec<usize>,
}

#[derive(Serialize)]
struct VerifyReport {
    op: &'static str,
    budget: u64,
    seed: u64,
    lip_budget: u64,
    tol: f64,
    #[serde(flatten)]
    check: RetractionCheck,
}

/// The base file and member lists of the two subsets for `dist`.
fn dist_inputs(a: &HyperspaceArgs) -> CliResult<(PathBuf, Vec<usize>, Vec<usize>)> {
    match (a.subset.as_slice(), &a.curve, &a.a, &a.b) {
        ([sa, sb], _, _, _) => {
            let (fa, fb): (SubsetFile, SubsetFile) = (read_json(sa)?, read_json(sb)?);
            let (pa, pb) = (relative_to(sa, &fa.base), relative_to(sb, &fb.base));
            let canon = |p: &Path| p.canonicalize().map_err(|e| CliError::Parse(format!("{}: {e}", p.display())));
            if canon(&pa)? != canon(&pb)? {
                return Err(CliError::Domain("subsets live in different base spaces".into()));
            }
            Ok((pa, fa.members, fb.members))
        }
        ([], Some(curve), Some(x), Some(y)) => Ok((curve.clone(), parse_ids(x)?, parse_ids(y)?)),
        _ => Err(CliError::Parse("dist needs two --subset files, or --curve with --a and --b".into())),
    }
}

fn cmd_hyperspace(a: HyperspaceArgs) -> CliResult<()> {
    match a.op {
        Op::Dist => {
            let (base, x, y) = dist_inputs(&a)?;
            let loaded = load(&base)?;
            let s = loaded.space();
            let cap = x.len().max(y.len()).max(1);
            let sa = FiniteSubset::new(s, &x, cap).map_err(domain)?;
            let sb = FiniteSubset::new(s, &y, cap).map_err(domain)?;
            let d = hausdorff(&sa, &sb).map_err(domain)?;
            let r = DistReport { hausdorff: d, a: sa.members().to_vec(), b: sb.members().to_vec() };
            emit(a.out.as_deref(), &to_json(&r))
        }
        Op::RetractVerify => {
            let path = a.curve.as_deref().ok_or_else(|| CliError::Parse("retract-verify needs --curve".into()))?;
            let loaded = load(path)?;
            let mu = build_handle(a.kind, loaded.curve()?, &a.handle)?;
            let retraction = mean_to_retraction(&mu, a.budget, a.seed).map_err(domain)?;
            let check = retraction.verify(a.budget, a.seed, a.lip_budget, a.tol).map_err(domain)?;
            let passed = check.passed;
            let failure = check.failure.clone().unwrap_or_default();
            let r = VerifyReport {
                op: "retract-verify",
                budget: a.budget,
                seed: a.seed,
                lip_budget: a.lip_budget,
                tol: a.tol,
                check,
            };
            emit(a.out.as_deref(), &to_json(&r))?;
            if passed {
                Ok(())
            } else {
                Err(CliError::Failed(failure))
            }
        }
    }
}

fn cmd_obstruct(a: ObstructArgs) -> CliResult<()> {
    let loaded = load(&a.curve)?;
    let base = if a.z0.trim() == "auto" {
        BasePoints::Auto(a.cap)
    } else {
        BasePoints::Explicit(parse_plane_points(&a.z0)?)
    };
    let report = mean_lip_lower_bound(loaded.curve()?, &base, a.budget, a.seed).map_err(domain)?;
    emit(a.out.as_deref(), &to_json(&report))
}

fn cmd_verify(a: VerifyArgs) -> CliResult<()> {
    if a.suite != "paper" {
        return Err(CliError::Parse(format!("unknown suite {:?}; the only suite is \"paper\"", a.suite)));
    }
    let ids: Vec<u8> = match a.only {
        Some(id) if criteria().any(|(c, _)| c == id) => vec![id],
        Some(id) => return Err(CliError::Parse(format!("no criterion {id}"))),
        None => criteria().map(|(id, _)| id).collect(),
    };
    let mut results: Vec<CriterionResult> = Vec::new();
    for id in ids {
        let r = run_criterion(id).expect("listed criterion");
        if !a.json {
            println!("{}", r.line());
        }
        results.push(r);
    }
    let failed: Vec<u8> = results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    if a.json {
        print!("{}", to_json(&results));
    } else {
        println!("{} of {} criteria passed", results.len() - failed.len(), results.len());
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(format!("criteria {failed:?}")))
    }
}
