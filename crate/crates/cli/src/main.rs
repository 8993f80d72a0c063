use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use kkt_spectra::criticality::{ClassifyOptions, CriticalitySystem};
use kkt_spectra::families::Family;
use kkt_spectra::io::{parse_direction_for, parse_geo_schedule, parse_point_for, parse_problem, parse_symmat};
use kkt_spectra::perturb::{error_bound_experiment, xpart_bound_check, ExperimentOptions, PerturbationPath};
use kkt_spectra::report::{self, AnalysisOptions, Payload, PerturbReport, Report};
use kkt_spectra::sosc::{check_soscy, SoscOptions, SoscVerdict};
use kkt_spectra::{Error, KktPoint, ProblemData, SymMat};

#[derive(Parser, Debug)]
#[command(name = "kkt-spectra", version, about = "Analyze KKT points of nonlinear semidefinite programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// KKT residuals, eigenvalue partition, constraint qualifications,
    /// multiplier criticality, second-order condition, closedness conditions.
    Analyze {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        search: Search,
    },
    /// Critical/noncritical classification of the multiplier.
    Criticality {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        search: Search,
    },
    /// Second-order sufficient condition at the given multiplier.
    Sosc {
        #[command(flatten)]
        common: Common,
    },
    /// Eigenvalue partition and cone structure at the point.
    Cones {
        #[command(flatten)]
        common: Common,
    },
    /// Error-bound sweep along a perturbation path.
    Perturb {
        #[command(flatten)]
        common: Common,
        /// Geometric schedule `start:end:count` [default: 1e-2:1e-5:13 for
        /// example2, 1e-2:1e-6:13 otherwise].
        #[arg(long)]
        geo: Option<String>,
        /// Direction file `{"p1": [...], "p2": [p*p]}` for --problem.
        #[arg(long)]
        direction: Option<PathBuf>,
        /// Also write `parameter,dx,p_norm,dy` rows here.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Start every point from the reference pair (points run in parallel).
        #[arg(long)]
        no_continuation: bool,
    },
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("source").required(true).args(["problem", "builtin"])))]
struct Common {
    /// Problem file (JSON).
    #[arg(long)]
    problem: Option<PathBuf>,
    /// Built-in problem: example2 or example3.
    #[arg(long, visible_alias = "family")]
    builtin: Option<String>,
    /// Point file `{"x": [...], "Y": [p*p]}`; defaults to the reference
    /// pair of a built-in problem.
    #[arg(long)]
    point: Option<PathBuf>,
    /// Off-diagonal matrix of example2, as nested rows.
    #[arg(long)]
    a: Option<String>,
    /// Absolute zero tolerance for eigenvalues [default: 1e-8 max(1, max|lambda|)].
    #[arg(long)]
    tol_eig: Option<f64>,
    /// KKT residual accepted as a certified point.
    #[arg(long, default_value_t = 1e-8)]
    tol_feas: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args, Debug)]
struct Search {
    /// Rotation angles tried when the degenerate block has size 2.
    #[arg(long, default_value_t = 181)]
    grid_points: usize,
    /// Random rotations tried when the degenerate block is larger.
    #[arg(long, default_value_t = 64)]
    samples: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Text,
    Json,
}

enum Failure {
    Usage(String),
    Lib(Error),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Io(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 3 })
        }
    }
}

fn read(path: &PathBuf) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

struct Loaded {
    pd: ProblemData,
    family: Option<Family>,
    x: Vec<f64>,
    y: SymMat,
}

fn load(c: &Common) -> Result<Loaded, Failure> {
    if !(c.tol_feas.is_finite() && c.tol_feas > 0.0) {
        return Err(Failure::Usage("--tol-feas must be positive".into()));
    }
    if let Some(t) = c.tol_eig {
        if !(t.is_finite() && t > 0.0) {
            return Err(Failure::Usage("--tol-eig must be positive".into()));
        }
    }
    let (pd, family) = match (&c.problem, &c.builtin) {
        (Some(p), None) => {
            if c.a.is_some() {
                return Err(Failure::Usage("--a applies to the example2 built-in only".into()));
            }
            (parse_problem(&read(p)?)?, None)
        }
        (None, Some(name)) => {
            let mut f = Family::from_name(name).map_err(|e| Failure::Usage(e.to_string()))?;
            if let Some(text) = &c.a {
                match &mut f {
                    Family::Example2 { a } => {
                        let m = parse_symmat(text)?;
                        if m.dim() != 2 {
                            return Err(Failure::Usage("--a must be 2x2".into()));
                        }
                        *a = m;
                    }
                    _ => return Err(Failure::Usage("--a applies to the example2 built-in only".into())),
                }
            }
            (f.base(), Some(f))
        }
        _ => return Err(Failure::Usage("give exactly one of --problem and --builtin".into())),
    };
    let (x, y) = match (&c.point, &family) {
        (Some(p), _) => parse_point_for(&read(p)?, &pd)?,
        (None, Some(f)) => f.reference_point(),
        (None, None) => return Err(Failure::Usage("--point is required with --problem".into())),
    };
    Ok(Loaded { pd, family, x, y })
}

fn certify(l: &Loaded, tol: f64) -> Result<KktPoint, Failure> {
    let kkt = KktPoint::evaluate(&l.pd, l.x.clone(), l.y.clone())?;
    if kkt.max_residual() > tol {
        return Err(Failure::Lib(Error::Input(format!(
            "point is not a KKT point: residuals {:.3e}, {:.3e} exceed {tol:.1e}",
            kkt.residuals.0, kkt.residuals.1
        ))));
    }
    Ok(kkt)
}

fn classify_opts(s: &Search, seed: u64) -> ClassifyOptions {
    ClassifyOptions { grid_points: s.grid_points.max(2), samples: s.samples.max(1), seed }
}

fn run(cli: Cli) -> Result<String, Failure> {
    let (payload, format) = match &cli.command {
        Command::Analyze { common, search } => {
            let l = load(common)?;
            let kkt = certify(&l, common.tol_feas)?;
            let mut o = AnalysisOptions::seeded(common.seed);
            o.classify = classify_opts(search, common.seed);
            (Payload::Analyze(Box::new(report::analyze(&l.pd, &kkt, common.tol_eig, &o)?)), common.format)
        }
        Command::Criticality { common, search } => {
            let l = load(common)?;
            let kkt = certify(&l, common.tol_feas)?;
            let o = classify_opts(search, common.seed);
            (Payload::Criticality(report::criticality(&l.pd, &kkt, common.tol_eig, &o)?), common.format)
        }
        Command::Sosc { common } => {
            let l = load(common)?;
            let kkt = certify(&l, common.tol_feas)?;
            let o = SoscOptions { seed: common.seed, ..SoscOptions::default() };
            (Payload::Sosc(report::sosc(&l.pd, &kkt, common.tol_eig, &o)?), common.format)
        }
        Command::Cones { common } => {
            let l = load(common)?;
            let kkt = certify(&l, common.tol_feas)?;
            (Payload::Cones(report::cones(&l.pd, &kkt, common.tol_eig)?), common.format)
        }
        Command::Perturb { common, geo, direction, csv, no_continuation } => {
            let l = load(common)?;
            let kkt = certify(&l, common.tol_feas)?;
            let path = match (&l.family, direction) {
                (Some(_), Some(_)) => return Err(Failure::Usage("--direction applies to --problem only".into())),
                (Some(f), None) => PerturbationPath::from_family(f),
                (None, Some(d)) => {
                    let (d1, d2) = parse_direction_for(&read(d)?, &l.pd)?;
                    PerturbationPath::linear("user", l.pd.clone(), l.x.clone(), l.y.clone(), d1, d2)?
                }
                (None, None) => return Err(Failure::Usage("--direction is required with --problem".into())),
            };
            let default_geo = match l.family {
                Some(Family::Example2 { .. }) => "1e-2:1e-5:13",
                _ => "1e-2:1e-6:13",
            };
            let schedule = parse_geo_schedule(geo.as_deref().unwrap_or(default_geo))
                .map_err(|e| Failure::Usage(format!("--geo: {e}")))?;
            let opts = ExperimentOptions { seed: common.seed, continuation: !no_continuation, ..ExperimentOptions::default() };
            let eb = error_bound_experiment(&path, &schedule, &opts)?;
            let sys = match common.tol_eig {
                Some(t) => CriticalitySystem::build_with_tol(&l.pd, &kkt, t)?,
                None => CriticalitySystem::build(&l.pd, &kkt)?,
            };
            let sos = check_soscy(&sys, &SoscOptions { seed: common.seed, ..SoscOptions::default() })?;
            let xpart = xpart_bound_check(&eb, sos.verdict == SoscVerdict::Holds);
            if let Some(p) = csv {
                std::fs::write(p, eb.to_csv())
                    .map_err(|e| Failure::Io(format!("{}: {e}", p.display())))?;
            }
            (Payload::Perturb(PerturbReport { error_bounds: eb, xpart }), common.format)
        }
    };
    let report = Report::new(payload);
    match format {
        Format::Json => Ok(report.to_json()? + "\n"),
        Format::Text => Ok(render_text(&report)),
    }
}

fn render_text(r: &Report) -> String {
    let mut s = String::new();
    let point = |s: &mut String, p: &kkt_spectra::report::PointInfo| {
        let _ = writeln!(s, "n = {}, p = {}", p.n, p.p);
        let _ = writeln!(s, "x = {:?}", p.x);
        let _ = writeln!(s, "KKT residuals: stationarity {:.3e}, complementarity {:.3e}", p.stationarity, p.complementarity);
    };
    let part = |s: &mut String, p: &kkt_spectra::report::PartitionInfo| {
        let _ = writeln!(s, "eigenvalues of G(x)+Y: {:?}", p.eigenvalues);
        let _ = writeln!(s, "partition: alpha={:?} beta={:?} gamma={:?}", p.alpha, p.beta, p.gamma);
        let _ = writeln!(
            s,
            "strict_complementarity={} normal_cone_polyhedral={} critical_cone_polyhedral={}",
            p.strict_complementarity, p.normal_cone_polyhedral, p.critical_cone_polyhedral
        );
    };
    let crit = |s: &mut String, c: &kkt_spectra::criticality::CriticalityVerdict| {
        let _ = writeln!(s, "multiplier: {} ({}; exhaustive={})", c.tag, c.certificate, c.exhaustive);
        if let Some(w) = &c.witness {
            let _ = writeln!(s, "  witness xi = {:?}, residual {:.3e}", w.xi, c.residual);
        }
    };
    let sos = |s: &mut String, o: &kkt_spectra::sosc::SecondOrderReport| {
        let min = o.min_value.map_or("none (critical cone is {0})".to_string(), |v| format!("{v:.6e}"));
        let _ = writeln!(s, "second order: {} (min {}, method {}, exact={})", o.verdict, min, o.search_stats.method, o.exact);
        let _ = writeln!(s, "necessary condition: {:?}", o.sonc_verdict);
    };
    match &r.payload {
        Payload::Analyze(a) => {
            point(&mut s, &a.point);
            part(&mut s, &a.partition);
            let _ = writeln!(s, "RCQ: {} (exact={})", a.rcq.holds, a.rcq.exact);
            let _ = writeln!(s, "SRCQ: {} (exact={})", a.srcq.holds, a.srcq.exact);
            crit(&mut s, &a.criticality);
            let _ = writeln!(s, "x-part condition: {} (exact={})", a.xpart.holds, a.xpart.exact);
            sos(&mut s, &a.sosc);
            let _ = writeln!(s, "closedness condition: {} ({})", a.bound_conditions.cond_i.verdict, a.bound_conditions.cond_i.evidence);
            let _ = writeln!(
                s,
                "orthogonality condition: {} ({}; beta-block diagnostic {:.3e})",
                a.bound_conditions.cond_ii.verdict, a.bound_conditions.cond_ii.evidence, a.bound_conditions.beta_inner_diagnostic
            );
        }
        Payload::Criticality(c) => {
            point(&mut s, &c.point);
            part(&mut s, &c.partition);
            crit(&mut s, &c.criticality);
            if let Some(n) = &c.nlp_crosscheck {
                let _ = writeln!(s, "diagonal NLP enumeration: {}", n.tag);
            }
        }
        Payload::Sosc(o) => {
            point(&mut s, &o.point);
            sos(&mut s, &o.sosc);
        }
        Payload::Cones(c) => {
            point(&mut s, &c.point);
            part(&mut s, &c.partition);
            let _ = writeln!(s, "Sigma = {:?}", c.sigma);
        }
        Payload::Perturb(p) => {
            let e = &p.error_bounds;
            let _ = writeln!(s, "family: {}", e.family);
            let _ = writeln!(s, "{:<14} {:<14} {:<14} {:<14} {:<14} {:<14}", "parameter", "|x-x_ref|", "|p1|+|p2|", "|Y-Y_ref|", "ratio_101", "ratio_91");
            let cell = |r: &Option<f64>| r.map_or("-".to_string(), |v| format!("{v:.6e}"));
            for (k, smp) in e.samples.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "{:<14.6e} {:<14.6e} {:<14.6e} {:<14.6e} {:<14} {:<14}",
                    smp.parameter,
                    e.dx[k],
                    smp.p_norm(),
                    e.dy[k],
                    cell(&e.ratios_101[k]),
                    cell(&e.ratios_91[k])
                );
            }
            match e.exponent_fit {
                Some(f) => {
                    let _ = writeln!(s, "exponent_fit: {:.4} (stderr {:.2e})", f.exponent, f.stderr);
                }
                None => {
                    let _ = writeln!(s, "exponent_fit: none");
                }
            }
            let _ = writeln!(s, "verdict_101: {}", e.verdict_101);
            let _ = writeln!(s, "verdict_91: {}", e.verdict_91);
            let _ = writeln!(s, "verdict_44: {}", e.verdict_44);
            if !e.excluded.is_empty() {
                let _ = writeln!(s, "excluded parameters: {:?}", e.excluded);
            }
            if e.multiple_roots {
                let _ = writeln!(s, "note: several KKT roots found; the one closest to the reference point was kept");
            }
            let _ = writeln!(s, "x-part bound: {} (second order certified: {})", p.xpart.verdict, p.xpart.soscy_certified);
        }
    }
    s
}
