//! Versioned machine-readable reports.

use serde::{Deserialize, Serialize};

use crate::cones::{is_critical_cone_polyhedral, is_normal_cone_polyhedral, strict_complementarity, ConeContext};
use crate::criticality::{
    check_rcq, classify_multiplier, classify_nlp, diagonal_reduction, ClassifyOptions, CqResult, CriticalitySystem,
    CriticalityVerdict, XPartResult,
};
use crate::error::{Error, Result};
use crate::perturb::{ErrorBoundReport, XpartBoundReport};
use crate::problem::{KktPoint, ProblemData};
use crate::sosc::{check_soscy, theorem3_conditions, SecondOrderReport, SoscOptions, BoundConditionsOptions, BoundConditionsReport};
use crate::symmat::SymMat;

pub const SCHEMA: &str = "kkt-spectra/1";

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Report {
    pub schema: String,
    #[serde(flatten)]
    pub payload: Payload,
}

impl Report {
    pub fn new(payload: Payload) -> Self {
        Report { schema: SCHEMA.into(), payload }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::numeric(format!("report serialization: {e}")))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Payload {
    Analyze(Box<AnalyzeReport>),
    Criticality(CriticalityReport),
    Sosc(SoscReport),
    Perturb(PerturbReport),
    Cones(ConesReport),
}

/// Parses a report and checks its schema tag.
pub fn parse_report(text: &str) -> Result<Report> {
    let r: Report = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if r.schema != SCHEMA {
        return Err(Error::Parse(format!("unsupported schema '{}'", r.schema)));
    }
    Ok(r)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PointInfo {
    pub n: usize,
    pub p: usize,
    pub x: Vec<f64>,
    #[serde(rename = "Y")]
    pub y: SymMat,
    pub stationarity: f64,
    pub complementarity: f64,
}

impl PointInfo {
    pub fn new(pd: &ProblemData, kkt: &KktPoint) -> Self {
        PointInfo {
            n: pd.n(),
            p: pd.p(),
            x: kkt.x.clone(),
            y: kkt.y.clone(),
            stationarity: kkt.residuals.0,
            complementarity: kkt.residuals.1,
        }
    }
}

/// Eigenvalues of `G(x) + Y` and the index sets of the split, in
/// descending eigenvalue order.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PartitionInfo {
    pub eigenvalues: Vec<f64>,
    pub tol_zero: f64,
    pub alpha: Vec<usize>,
    pub beta: Vec<usize>,
    pub gamma: Vec<usize>,
    pub strict_complementarity: bool,
    pub normal_cone_polyhedral: bool,
    pub critical_cone_polyhedral: bool,
}

impl PartitionInfo {
    pub fn new(ctx: &ConeContext) -> Self {
        PartitionInfo {
            eigenvalues: ctx.decomp().eigenvalues().to_vec(),
            tol_zero: ctx.decomp().tol_zero(),
            alpha: ctx.alpha().collect(),
            beta: ctx.beta().collect(),
            gamma: ctx.gamma().collect(),
            strict_complementarity: strict_complementarity(ctx),
            normal_cone_polyhedral: is_normal_cone_polyhedral(ctx),
            critical_cone_polyhedral: is_critical_cone_polyhedral(ctx),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct AnalyzeReport {
    pub point: PointInfo,
    pub partition: PartitionInfo,
    pub rcq: CqResult,
    pub srcq: CqResult,
    pub criticality: CriticalityVerdict,
    pub xpart: XPartResult,
    pub sosc: SecondOrderReport,
    pub bound_conditions: BoundConditionsReport,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CriticalityReport {
    pub point: PointInfo,
    pub partition: PartitionInfo,
    pub criticality: CriticalityVerdict,
    /// Exact branch enumeration of the equivalent NLP, when all data are
    /// diagonal.
    pub nlp_crosscheck: Option<CriticalityVerdict>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SoscReport {
    pub point: PointInfo,
    pub sosc: SecondOrderReport,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ConesReport {
    pub point: PointInfo,
    pub partition: PartitionInfo,
    /// Divided-difference matrix of the PSD projection at `G(x) + Y`.
    pub sigma: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PerturbReport {
    pub error_bounds: ErrorBoundReport,
    pub xpart: XpartBoundReport,
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct AnalysisOptions {
    pub classify: ClassifyOptions,
    pub sosc: SoscOptions,
    pub bound_conditions: BoundConditionsOptions,
}

impl AnalysisOptions {
    pub fn seeded(seed: u64) -> Self {
        let mut o = AnalysisOptions::default();
        o.classify.seed = seed;
        o.sosc.seed = seed;
        o.bound_conditions.seed = seed;
        o
    }
}

pub fn analyze(pd: &ProblemData, kkt: &KktPoint, tol_zero: Option<f64>, opts: &AnalysisOptions) -> Result<AnalyzeReport> {
    let sys = build_system(pd, kkt, tol_zero)?;
    Ok(AnalyzeReport {
        point: PointInfo::new(pd, kkt),
        partition: PartitionInfo::new(sys.ctx()),
        rcq: check_rcq(pd, &kkt.x)?,
        srcq: sys.check_srcq()?,
        criticality: classify_multiplier(&sys, &opts.classify)?,
        xpart: sys.xpart_condition()?,
        sosc: check_soscy(&sys, &opts.sosc)?,
        bound_conditions: theorem3_conditions(&sys, &opts.bound_conditions)?,
    })
}

pub fn criticality(pd: &ProblemData, kkt: &KktPoint, tol_zero: Option<f64>, opts: &ClassifyOptions) -> Result<CriticalityReport> {
    let sys = build_system(pd, kkt, tol_zero)?;
    let nlp = match diagonal_reduction(pd, kkt, sys.ctx().decomp().tol_zero())? {
        Some(n) => Some(classify_nlp(&n)?),
        None => None,
    };
    Ok(CriticalityReport {
        point: PointInfo::new(pd, kkt),
        partition: PartitionInfo::new(sys.ctx()),
        criticality: classify_multiplier(&sys, opts)?,
        nlp_crosscheck: nlp,
    })
}

pub fn sosc(pd: &ProblemData, kkt: &KktPoint, tol_zero: Option<f64>, opts: &SoscOptions) -> Result<SoscReport> {
    let sys = build_system(pd, kkt, tol_zero)?;
    Ok(SoscReport { point: PointInfo::new(pd, kkt), sosc: check_soscy(&sys, opts)? })
}

pub fn cones(pd: &ProblemData, kkt: &KktPoint, tol_zero: Option<f64>) -> Result<ConesReport> {
    let sys = build_system(pd, kkt, tol_zero)?;
    let s = sys.ctx().decomp().sigma();
    Ok(ConesReport {
        point: PointInfo::new(pd, kkt),
        partition: PartitionInfo::new(sys.ctx()),
        sigma: (0..s.nrows()).map(|i| s.row(i).iter().copied().collect()).collect(),
    })
}

fn build_system(pd: &ProblemData, kkt: &KktPoint, tol_zero: Option<f64>) -> Result<CriticalitySystem> {
    match tol_zero {
        Some(t) => CriticalitySystem::build_with_tol(pd, kkt, t),
        None => CriticalitySystem::build(pd, kkt),
    }
}
