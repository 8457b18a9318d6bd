//! The hierarchical leg controller: four single-leg sub-controllers per leg,
//! each a set of single-output fuzzy units trained on reference-gait samples.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anfis::{
    evaluate_sse, initial_unit, train_hybrid, TrainingConfig, TrainingReport, TrainingSet,
};
use crate::biped::{BipedParams, GaitConfig, GaitCycle, GaitFrame, Point};
use crate::error::{Error, Result};
use crate::fuzzy::{FuzzyLogicUnit, Interval};
use crate::io::{fmt_f64, parse_f64, read_csv};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SignalId {
    #[serde(rename = "x0")]
    X0,
    #[serde(rename = "y0")]
    Y0,
    #[serde(rename = "beta_L")]
    BetaL,
    #[serde(rename = "gamma_L")]
    GammaL,
    #[serde(rename = "beta_R")]
    BetaR,
    #[serde(rename = "gamma_R")]
    GammaR,
    #[serde(rename = "ankle_Lx")]
    AnkleLx,
    #[serde(rename = "ankle_Ly")]
    AnkleLy,
    #[serde(rename = "ankle_Rx")]
    AnkleRx,
    #[serde(rename = "ankle_Ry")]
    AnkleRy,
    #[serde(rename = "knee_Lx")]
    KneeLx,
    #[serde(rename = "knee_Ly")]
    KneeLy,
    #[serde(rename = "knee_Rx")]
    KneeRx,
    #[serde(rename = "knee_Ry")]
    KneeRy,
}

/// How a signal transforms under reflection about a vertical axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SignalKind {
    Horizontal,
    Vertical,
    Angle,
}

impl SignalId {
    pub const ALL: [SignalId; 14] = [
        SignalId::X0,
        SignalId::Y0,
        SignalId::BetaL,
        SignalId::GammaL,
        SignalId::BetaR,
        SignalId::GammaR,
        SignalId::AnkleLx,
        SignalId::AnkleLy,
        SignalId::AnkleRx,
        SignalId::AnkleRy,
        SignalId::KneeLx,
        SignalId::KneeLy,
        SignalId::KneeRx,
        SignalId::KneeRy,
    ];

    pub fn name(self) -> &'static str {
        use SignalId::*;
        match self {
            X0 => "x0",
            Y0 => "y0",
            BetaL => "beta_L",
            GammaL => "gamma_L",
            BetaR => "beta_R",
            GammaR => "gamma_R",
            AnkleLx => "ankle_Lx",
            AnkleLy => "ankle_Ly",
            AnkleRx => "ankle_Rx",
            AnkleRy => "ankle_Ry",
            KneeLx => "knee_Lx",
            KneeLy => "knee_Ly",
            KneeRx => "knee_Rx",
            KneeRy => "knee_Ry",
        }
    }

    pub fn kind(self) -> SignalKind {
        use SignalId::*;
        match self {
            X0 | AnkleLx | AnkleRx | KneeLx | KneeRx => SignalKind::Horizontal,
            Y0 | AnkleLy | AnkleRy | KneeLy | KneeRy => SignalKind::Vertical,
            BetaL | GammaL | BetaR | GammaR => SignalKind::Angle,
        }
    }

    /// Left/right counterpart; body signals map to themselves.
    pub fn swap_side(self) -> Self {
        use SignalId::*;
        match self {
            X0 => X0,
            Y0 => Y0,
            BetaL => BetaR,
            GammaL => GammaR,
            BetaR => BetaL,
            GammaR => GammaL,
            AnkleLx => AnkleRx,
            AnkleLy => AnkleRy,
            AnkleRx => AnkleLx,
            AnkleRy => AnkleLy,
            KneeLx => KneeRx,
            KneeLy => KneeRy,
            KneeRx => KneeLx,
            KneeRy => KneeLy,
        }
    }

    pub fn read(self, f: &GaitFrame) -> f64 {
        use SignalId::*;
        let (s, k) = (&f.state, &f.kin);
        match self {
            X0 => k.com.x,
            Y0 => k.com.y,
            BetaL => s.beta_left,
            GammaL => s.gamma_left,
            BetaR => s.beta_right,
            GammaR => s.gamma_right,
            AnkleLx => k.ankle_left.x,
            AnkleLy => k.ankle_left.y,
            AnkleRx => k.ankle_right.x,
            AnkleRy => k.ankle_right.y,
            KneeLx => k.knee_left.x,
            KneeLy => k.knee_left.y,
            KneeRx => k.knee_right.x,
            KneeRy => k.knee_right.y,
        }
    }

    /// Value of this signal's counterpart after reflecting about `x = axis`.
    pub fn reflect_value(self, v: f64, axis: f64) -> f64 {
        match self.kind() {
            SignalKind::Horizontal => 2.0 * axis - v,
            SignalKind::Vertical => v,
            SignalKind::Angle => -v,
        }
    }
}

impl fmt::Display for SignalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SignalId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SignalId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| Error::Signal(format!("unknown signal {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ControllerId {
    #[serde(rename = "HFL1")]
    Hfl1,
    #[serde(rename = "HFL2")]
    Hfl2,
    #[serde(rename = "HFL3")]
    Hfl3,
    #[serde(rename = "HFL4")]
    Hfl4,
    #[serde(rename = "HFL5")]
    Hfl5,
    #[serde(rename = "HFL6")]
    Hfl6,
    #[serde(rename = "HFL7")]
    Hfl7,
    #[serde(rename = "HFL8")]
    Hfl8,
}

impl ControllerId {
    pub const ALL: [ControllerId; 8] = [
        ControllerId::Hfl1,
        ControllerId::Hfl2,
        ControllerId::Hfl3,
        ControllerId::Hfl4,
        ControllerId::Hfl5,
        ControllerId::Hfl6,
        ControllerId::Hfl7,
        ControllerId::Hfl8,
    ];

    pub fn number(self) -> u8 {
        self as u8 + 1
    }

    /// Odd ids drive the left leg.
    pub fn is_left(self) -> bool {
        self.number() % 2 == 1
    }

    /// 1<->2, 3<->4, 5<->6, 7<->8.
    pub fn mirror(self) -> Self {
        let n = self.number();
        let m = if n % 2 == 1 { n + 1 } else { n - 1 };
        ControllerId::ALL[usize::from(m - 1)]
    }
}

impl fmt::Display for ControllerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HFL{}", self.number())
    }
}

impl FromStr for ControllerId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let n: usize = s
            .strip_prefix("HFL")
            .or_else(|| s.strip_prefix("hfl"))
            .and_then(|d| d.parse().ok())
            .filter(|n| (1..=8).contains(n))
            .ok_or_else(|| Error::Signal(format!("unknown controller {s:?}")))?;
        Ok(ControllerId::ALL[n - 1])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Worker,
    Supervisor,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubControllerSpec {
    pub id: ControllerId,
    pub inputs: Vec<SignalId>,
    pub outputs: Vec<SignalId>,
    /// 1 ankle, 2 knee, 3 centre of mass.
    pub level: u8,
    pub role: Role,
}

impl SubControllerSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(format!("{}: {msg}", self.id)));
        if self.inputs.is_empty() {
            return bad("no inputs");
        }
        if !(1..=2).contains(&self.outputs.len()) {
            return bad("needs one or two outputs");
        }
        if !(self.inputs.contains(&SignalId::X0) && self.inputs.contains(&SignalId::Y0)) {
            return bad("x0 and y0 must be inputs");
        }
        if !(1..=3).contains(&self.level) {
            return bad("level must be 1, 2 or 3");
        }
        Ok(())
    }

    /// Right-leg counterpart (or left, for a right-leg spec).
    pub fn mirror(&self) -> Self {
        Self {
            id: self.id.mirror(),
            inputs: self.inputs.iter().map(|s| s.swap_side()).collect(),
            outputs: self.outputs.iter().map(|s| s.swap_side()).collect(),
            level: self.level,
            role: self.role,
        }
    }

    pub fn input_index(&self, s: SignalId) -> Option<usize> {
        self.inputs.iter().position(|&i| i == s)
    }

    fn check_output(&self, output: SignalId) -> Result<()> {
        if self.outputs.contains(&output) {
            Ok(())
        } else {
            Err(Error::Signal(format!(
                "{output} is not an output of {}",
                self.id
            )))
        }
    }
}

/// HFL1, HFL3, HFL5, HFL7.
pub fn left_leg_specs() -> Vec<SubControllerSpec> {
    use SignalId::*;
    let spec = |id, inputs: &[SignalId], outputs: &[SignalId], level, role| SubControllerSpec {
        id,
        inputs: inputs.to_vec(),
        outputs: outputs.to_vec(),
        level,
        role,
    };
    vec![
        spec(
            ControllerId::Hfl1,
            &[X0, Y0, BetaL],
            &[GammaL],
            3,
            Role::Worker,
        ),
        spec(
            ControllerId::Hfl3,
            &[X0, Y0, GammaL],
            &[AnkleLx, AnkleLy],
            1,
            Role::Worker,
        ),
        spec(
            ControllerId::Hfl5,
            &[X0, Y0, AnkleLx, AnkleLy],
            &[BetaL],
            3,
            Role::Worker,
        ),
        spec(
            ControllerId::Hfl7,
            &[X0, Y0, BetaL],
            &[KneeLx, KneeLy],
            2,
            Role::Supervisor,
        ),
    ]
}

pub fn mirror_specs(specs: &[SubControllerSpec]) -> Vec<SubControllerSpec> {
    specs.iter().map(SubControllerSpec::mirror).collect()
}

/// All eight specs ordered by id.
pub fn all_specs() -> Vec<SubControllerSpec> {
    let left = left_leg_specs();
    let mut all: Vec<_> = left.iter().cloned().chain(mirror_specs(&left)).collect();
    all.sort_by_key(|s| s.id);
    all
}

/// Rules per controller output unit for a full grid with `m` terms per input.
pub fn spec_rule_count(spec: &SubControllerSpec, m: usize) -> Result<u64> {
    crate::fuzzy::flat_rule_count(spec.inputs.len(), m)
}

/// `size` rows read from `gait` at uniform phase spacing from `offset`.
///
/// Positions are computed in frame units, so `size` equal to the frame
/// count with offset 0 reads exactly the stored frames.
pub fn sample_training_set(
    gait: &GaitCycle,
    io: &SubControllerSpec,
    output: SignalId,
    size: usize,
    offset: f64,
) -> Result<TrainingSet> {
    io.check_output(output)?;
    let n = gait.len();
    if size == 0 || size > n {
        return Err(Error::InvalidConfig(format!(
            "sample size must lie in 1..={n}, got {size}"
        )));
    }
    let rows = sample_positions(n, size, offset)
        .map(|pos| {
            let f = gait.frame_at_position(pos);
            (
                io.inputs.iter().map(|s| s.read(&f)).collect(),
                output.read(&f),
            )
        })
        .collect();
    TrainingSet::new(rows)
}

fn sample_positions(frames: usize, size: usize, offset: f64) -> impl Iterator<Item = f64> {
    let start = offset * frames as f64;
    (0..size).map(move |k| start + (k * frames) as f64 / size as f64)
}

/// Phase offset of the held-out grid for a training set of `size` rows:
/// half the training spacing.
pub fn held_out_offset(size: usize) -> f64 {
    0.5 / size as f64
}

/// Reflects every row of a set sampled for `spec` about `x = axis`; the result
/// is laid out for `spec.mirror()`.
pub fn mirror_training_set(
    set: &TrainingSet,
    spec: &SubControllerSpec,
    output: SignalId,
    axis: f64,
) -> Result<TrainingSet> {
    if set.arity() != spec.inputs.len() {
        return Err(Error::Arity {
            expected: spec.inputs.len(),
            got: set.arity(),
        });
    }
    let rows = set
        .rows()
        .map(|(x, t)| {
            let xm = x
                .iter()
                .zip(&spec.inputs)
                .map(|(v, s)| s.reflect_value(*v, axis))
                .collect();
            (xm, output.reflect_value(t, axis))
        })
        .collect();
    TrainingSet::new(rows)
}

/// Where the right-leg controllers take their training data from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RightLegData {
    /// The right-leg signals of the same gait.
    #[default]
    Direct,
    /// The left-leg rows reflected about `x = axis`.
    Mirrored { axis: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub params: BipedParams,
    pub gait: GaitConfig,
    pub size: usize,
    pub training: TrainingConfig,
    pub right_leg: RightLegData,
}

pub type UnitKey = (ControllerId, SignalId);

/// Trained units for all sub-controllers, one unit per output signal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HflcAssembly {
    pub specs: Vec<SubControllerSpec>,
    pub units: BTreeMap<ControllerId, BTreeMap<SignalId, FuzzyLogicUnit>>,
    pub provenance: Provenance,
}

impl HflcAssembly {
    pub fn spec(&self, id: ControllerId) -> Result<&SubControllerSpec> {
        self.specs
            .iter()
            .find(|s| s.id == id)
            .ok_or_else(|| Error::Signal(format!("controller {id} not in assembly")))
    }

    pub fn unit(&self, id: ControllerId, output: SignalId) -> Result<&FuzzyLogicUnit> {
        self.units
            .get(&id)
            .and_then(|m| m.get(&output))
            .ok_or_else(|| Error::Signal(format!("{id} has no unit for {output}")))
    }

    pub fn unit_count(&self) -> usize {
        self.units.values().map(BTreeMap::len).sum()
    }

    /// Reads the controller's inputs from `frame` and evaluates one output,
    /// clamping inputs to the unit's universes.
    pub fn predict(&self, id: ControllerId, output: SignalId, frame: &GaitFrame) -> Result<f64> {
        let spec = self.spec(id)?;
        let x: Vec<f64> = spec.inputs.iter().map(|s| s.read(frame)).collect();
        self.unit(id, output)?.infer_clamped(&x)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let a: HflcAssembly = serde_json::from_str(text)?;
        for spec in &a.specs {
            spec.validate()?;
            for out in &spec.outputs {
                let unit = a.unit(spec.id, *out)?;
                if unit.arity() != spec.inputs.len() {
                    return Err(Error::Arity {
                        expected: spec.inputs.len(),
                        got: unit.arity(),
                    });
                }
            }
        }
        Ok(a)
    }
}

struct Job {
    spec: SubControllerSpec,
    output: SignalId,
    /// Left-leg spec whose rows are reflected, for mirrored right-leg data.
    reflect_from: Option<(SubControllerSpec, f64)>,
}

fn jobs(specs: &[SubControllerSpec], right: RightLegData) -> Vec<Job> {
    specs
        .iter()
        .flat_map(|spec| {
            spec.outputs.iter().map(move |&output| Job {
                spec: spec.clone(),
                output,
                reflect_from: match right {
                    RightLegData::Mirrored { axis } if !spec.id.is_left() => {
                        Some((spec.mirror(), axis))
                    }
                    _ => None,
                },
            })
        })
        .collect()
}

impl Job {
    fn data(&self, gait: &GaitCycle, size: usize, offset: f64) -> Result<TrainingSet> {
        match &self.reflect_from {
            None => sample_training_set(gait, &self.spec, self.output, size, offset),
            Some((left, axis)) => {
                let out = self.output.swap_side();
                let set = sample_training_set(gait, left, out, size, offset)?;
                mirror_training_set(&set, left, out, *axis)
            }
        }
    }

    fn tag(&self, e: Error) -> Error {
        Error::Controller {
            controller: self.spec.id.to_string(),
            output: self.output.to_string(),
            source: Box::new(e),
        }
    }
}

fn run_jobs<T: Send>(
    jobs: &[Job],
    parallel: bool,
    f: impl Fn(&Job) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let wrapped = |j: &Job| f(j).map_err(|e| j.tag(e));
    if parallel {
        jobs.par_iter().map(wrapped).collect()
    } else {
        jobs.iter().map(wrapped).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AssemblyOptions {
    pub training: TrainingConfig,
    pub right_leg: RightLegData,
    /// Train units concurrently; results are identical either way.
    pub parallel: bool,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self {
            training: TrainingConfig::default(),
            right_leg: RightLegData::Direct,
            parallel: false,
        }
    }
}

impl Job {
    /// Grid unit over the training data's universes. For reflected data the
    /// partition is the reflection of the source leg's, which holds the same
    /// terms with index order kept, so training stays sign-equivariant bit
    /// for bit.
    fn initial(
        &self,
        gait: &GaitCycle,
        size: usize,
        cfg: &TrainingConfig,
    ) -> Result<FuzzyLogicUnit> {
        let names: Vec<&str> = self.spec.inputs.iter().map(|s| s.name()).collect();
        match &self.reflect_from {
            None => initial_unit(&names, &self.data(gait, size, 0.0)?, cfg),
            Some((left, axis)) => {
                let out = self.output.swap_side();
                let src = sample_training_set(gait, left, out, size, 0.0)?;
                let src_names: Vec<&str> = left.inputs.iter().map(|s| s.name()).collect();
                let axes: Vec<Option<f64>> = left
                    .inputs
                    .iter()
                    .map(|s| (s.kind() != SignalKind::Vertical).then_some(*axis))
                    .collect();
                initial_unit(&src_names, &src, cfg)?.reflect_inputs(&axes, &names)
            }
        }
    }
}

fn train_unit(
    job: &Job,
    gait: &GaitCycle,
    size: usize,
    cfg: &TrainingConfig,
) -> Result<(FuzzyLogicUnit, TrainingReport)> {
    let data = job.data(gait, size, 0.0)?;
    let init = job.initial(gait, size, cfg)?;
    let (unit, mut report) = train_hybrid(&init, &data, cfg)?;
    let test = job.data(gait, size, held_out_offset(size))?;
    report.index = Some(evaluate_sse(&unit, &test)?);
    Ok((unit, report))
}

fn assemble(
    gait: &GaitCycle,
    size: usize,
    opts: &AssemblyOptions,
    trained: Vec<(UnitKey, FuzzyLogicUnit)>,
) -> HflcAssembly {
    let mut units: BTreeMap<ControllerId, BTreeMap<SignalId, FuzzyLogicUnit>> = BTreeMap::new();
    for ((id, out), unit) in trained {
        units.entry(id).or_default().insert(out, unit);
    }
    HflcAssembly {
        specs: all_specs(),
        units,
        provenance: Provenance {
            params: gait.params,
            gait: gait.config.clone(),
            size,
            training: opts.training.clone(),
            right_leg: opts.right_leg,
        },
    }
}

/// Trains every output of all eight sub-controllers on `size` samples.
/// Each report's `index` is the SSE on the held-out half-offset grid.
pub fn train_assembly(
    gait: &GaitCycle,
    size: usize,
    opts: &AssemblyOptions,
) -> Result<(HflcAssembly, BTreeMap<UnitKey, TrainingReport>)> {
    opts.training.validate()?;
    let jobs = jobs(&all_specs(), opts.right_leg);
    let results = run_jobs(&jobs, opts.parallel, |j| {
        train_unit(j, gait, size, &opts.training)
    })?;
    let mut reports = BTreeMap::new();
    let mut trained = Vec::with_capacity(jobs.len());
    for (job, (unit, report)) in jobs.iter().zip(results) {
        reports.insert((job.spec.id, job.output), report);
        trained.push(((job.spec.id, job.output), unit));
    }
    Ok((assemble(gait, size, opts, trained), reports))
}

/// Grid units over the same universes as [`train_assembly`] would use, with
/// zero consequents and no training.
pub fn untrained_assembly(
    gait: &GaitCycle,
    size: usize,
    opts: &AssemblyOptions,
) -> Result<HflcAssembly> {
    opts.training.validate()?;
    let jobs = jobs(&all_specs(), opts.right_leg);
    let units = run_jobs(&jobs, false, |j| j.initial(gait, size, &opts.training))?;
    let trained = jobs
        .iter()
        .map(|j| (j.spec.id, j.output))
        .zip(units)
        .collect();
    Ok(assemble(gait, size, opts, trained))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub controller: ControllerId,
    pub output: SignalId,
    pub size: usize,
    /// Held-out SSE.
    pub sse: f64,
    pub train_sse: f64,
}

pub const CURVE_HEADER: &str = "controller,output,size,sse";

/// Held-out SSE for every unit at every size, rows ordered by size, then
/// controller, then output.
pub fn sse_curve(
    gait: &GaitCycle,
    sizes: &[usize],
    opts: &AssemblyOptions,
) -> Result<Vec<CurveRow>> {
    if sizes.is_empty() {
        return Err(Error::InvalidConfig("no sizes given".into()));
    }
    let mut rows = Vec::new();
    for &size in sizes {
        let (_, reports) = train_assembly(gait, size, opts)?;
        for ((controller, output), r) in reports {
            rows.push(CurveRow {
                controller,
                output,
                size,
                sse: r.index.expect("train_assembly fills the held-out index"),
                train_sse: r.final_sse,
            });
        }
    }
    Ok(rows)
}

pub fn curve_to_csv(rows: &[CurveRow]) -> String {
    let mut out = format!("{CURVE_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.controller,
            r.output,
            r.size,
            fmt_f64(r.sse)
        );
    }
    out
}

/// `(controller, output, size, sse)` rows from [`curve_to_csv`] output.
pub fn curve_from_csv(text: &str) -> Result<Vec<(ControllerId, SignalId, usize, f64)>> {
    read_csv(text, CURVE_HEADER)?
        .into_iter()
        .map(|f| {
            let size = f[2]
                .trim()
                .parse()
                .map_err(|_| Error::InvalidData(format!("bad size {:?}", f[2])))?;
            Ok((
                f[0].trim().parse()?,
                f[1].trim().parse()?,
                size,
                parse_f64(f[3])?,
            ))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalTracking {
    pub controller: ControllerId,
    pub rmse: f64,
    /// Max minus min of the reference signal over the cycle.
    pub range: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeedforwardReport {
    pub signals: BTreeMap<SignalId, SignalTracking>,
    /// Input values that fell outside a unit's universe and were clamped.
    pub clamped_inputs: usize,
    /// Per supervisor: RMSE between its knee prediction and the knee implied
    /// by the same leg's predicted thigh angle.
    pub knee_consistency: BTreeMap<ControllerId, f64>,
    pub frames: usize,
}

/// Feeds every stored frame's reference signals to every unit and compares
/// predictions with the reference trajectory.
pub fn run_feedforward(assembly: &HflcAssembly, gait: &GaitCycle) -> Result<FeedforwardReport> {
    let mut sq: BTreeMap<SignalId, (ControllerId, f64, f64, f64)> = BTreeMap::new();
    let mut predicted: Vec<BTreeMap<SignalId, f64>> = vec![BTreeMap::new(); gait.len()];
    let mut clamped = 0;
    for spec in &assembly.specs {
        for &out in &spec.outputs {
            let unit = assembly.unit(spec.id, out)?;
            let entry = sq
                .entry(out)
                .or_insert((spec.id, 0.0, f64::INFINITY, f64::NEG_INFINITY));
            for (f, pred) in gait.frames.iter().zip(predicted.iter_mut()) {
                let x: Vec<f64> = spec.inputs.iter().map(|s| s.read(f)).collect();
                clamped += x
                    .iter()
                    .zip(unit.inputs())
                    .filter(|(v, var)| !var.universe().contains(**v))
                    .count();
                let y = unit.infer_clamped(&x).map_err(|e| Error::Controller {
                    controller: spec.id.to_string(),
                    output: out.to_string(),
                    source: Box::new(e),
                })?;
                let r = out.read(f);
                entry.1 += (y - r) * (y - r);
                entry.2 = entry.2.min(r);
                entry.3 = entry.3.max(r);
                pred.insert(out, y);
            }
        }
    }
    let n = gait.len() as f64;
    let signals = sq
        .into_iter()
        .map(|(s, (controller, sse, lo, hi))| {
            (
                s,
                SignalTracking {
                    controller,
                    rmse: (sse / n).sqrt(),
                    range: hi - lo,
                },
            )
        })
        .collect();

    let thigh = gait.params.thigh;
    let mut knee_consistency = BTreeMap::new();
    for spec in assembly.specs.iter().filter(|s| s.role == Role::Supervisor) {
        let left = spec.id.is_left();
        let (beta, kx, ky) = if left {
            (SignalId::BetaL, SignalId::KneeLx, SignalId::KneeLy)
        } else {
            (SignalId::BetaR, SignalId::KneeRx, SignalId::KneeRy)
        };
        let mut sse = 0.0;
        let mut count = 0usize;
        for (f, p) in gait.frames.iter().zip(&predicted) {
            if let (Some(b), Some(x), Some(y)) = (p.get(&beta), p.get(&kx), p.get(&ky)) {
                let hip = f.state.hip;
                let implied = Point::new(hip.x + thigh * b.sin(), hip.y - thigh * b.cos());
                sse += implied.dist(Point::new(*x, *y)).powi(2);
                count += 1;
            }
        }
        if count > 0 {
            knee_consistency.insert(spec.id, (sse / count as f64).sqrt());
        }
    }
    Ok(FeedforwardReport {
        signals,
        clamped_inputs: clamped,
        knee_consistency,
        frames: gait.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceMeta {
    pub controller: ControllerId,
    pub output: SignalId,
    pub free: [SignalId; 2],
    pub free_universes: [Interval; 2],
    /// Value of every other input, defaulted to its universe midpoint.
    pub fixed: BTreeMap<SignalId, f64>,
    pub resolution: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Surface {
    pub meta: SurfaceMeta,
    /// `(u, v, out)`, `u` outer.
    pub rows: Vec<[f64; 3]>,
}

pub const SURFACE_HEADER: &str = "u,v,out";

/// Output of one unit over a `resolution`-square grid spanning two of its
/// inputs' universes, the remaining inputs held fixed.
pub fn surface_grid(
    assembly: &HflcAssembly,
    controller: ControllerId,
    output: SignalId,
    free: [SignalId; 2],
    fixed: &BTreeMap<SignalId, f64>,
    resolution: usize,
) -> Result<Surface> {
    let spec = assembly.spec(controller)?;
    spec.check_output(output)?;
    let unit = assembly.unit(controller, output)?;
    if resolution < 2 {
        return Err(Error::InvalidConfig(format!(
            "resolution must be at least 2, got {resolution}"
        )));
    }
    if free[0] == free[1] {
        return Err(Error::Signal(format!(
            "free signals must differ, got {} twice",
            free[0]
        )));
    }
    let idx = |s: SignalId| {
        spec.input_index(s)
            .ok_or_else(|| Error::Signal(format!("{s} is not an input of {controller}")))
    };
    let (iu, iv) = (idx(free[0])?, idx(free[1])?);
    for s in fixed.keys() {
        let i = idx(*s)?;
        if i == iu || i == iv {
            return Err(Error::Signal(format!("{s} is both free and fixed")));
        }
    }
    let universes: Vec<Interval> = unit.inputs().iter().map(|v| v.universe()).collect();
    let mut x: Vec<f64> = universes.iter().map(Interval::midpoint).collect();
    let mut all_fixed = BTreeMap::new();
    for (i, s) in spec.inputs.iter().enumerate() {
        if i != iu && i != iv {
            x[i] = fixed.get(s).copied().unwrap_or(x[i]);
            all_fixed.insert(*s, x[i]);
        }
    }
    let mut rows = Vec::with_capacity(resolution * resolution);
    for a in 0..resolution {
        for b in 0..resolution {
            x[iu] = universes[iu].grid_point(a, resolution);
            x[iv] = universes[iv].grid_point(b, resolution);
            rows.push([x[iu], x[iv], unit.infer_clamped(&x)?]);
        }
    }
    Ok(Surface {
        meta: SurfaceMeta {
            controller,
            output,
            free,
            free_universes: [universes[iu], universes[iv]],
            fixed: all_fixed,
            resolution,
        },
        rows,
    })
}

impl Surface {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{SURFACE_HEADER}\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{}", fmt_f64(r[0]), fmt_f64(r[1]), fmt_f64(r[2]));
        }
        out
    }

    pub fn rows_from_csv(text: &str) -> Result<Vec<[f64; 3]>> {
        read_csv(text, SURFACE_HEADER)?
            .into_iter()
            .map(|f| Ok([parse_f64(f[0])?, parse_f64(f[1])?, parse_f64(f[2])?]))
            .collect()
    }

    pub fn sidecar_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.meta)?)
    }
}
