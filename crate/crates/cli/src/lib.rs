//! Library side of the `hflc` command: run configuration, one function per
//! subcommand, and the mapping from failures to exit codes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use hflc_core::anfis::TrainingConfig;
use hflc_core::biped::{generate_reference_gait, BipedParams, GaitConfig, GaitCycle};
use hflc_core::controller::{
    curve_to_csv, sse_curve, surface_grid, train_assembly, AssemblyOptions, ControllerId,
    HflcAssembly, RightLegData, SignalId,
};
use hflc_core::fuzzy::flat_rule_count;
use hflc_core::hierarchy::HierarchyPlan;

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Marks an error as a usage problem (bad flag value, unknown name).
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Exit code for a failed command: the first I/O, numeric or usage cause in
/// the chain decides.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    use hflc_core::Error as E;
    for cause in err.chain() {
        if cause.is::<UsageError>() || cause.is::<clap::Error>() {
            return EXIT_USAGE;
        }
        if cause.is::<std::io::Error>() {
            return EXIT_IO;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Io(_) => EXIT_IO,
                _ if e.is_numeric() => EXIT_NUMERIC,
                E::Controller { .. } => continue,
                _ => EXIT_USAGE,
            };
        }
        if cause.is::<serde_json::Error>() {
            return EXIT_USAGE;
        }
    }
    EXIT_OTHER
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub biped: BipedParams,
    pub gait: GaitConfig,
    pub training: TrainingConfig,
    pub sizes: Vec<usize>,
    pub out: PathBuf,
    pub seed: u64,
    pub right_leg: RightLegData,
    pub parallel: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            biped: BipedParams::default(),
            gait: GaitConfig::default(),
            training: TrainingConfig::default(),
            sizes: vec![10, 30, 40, 60, 120],
            out: PathBuf::from("out"),
            seed: 0,
            right_leg: RightLegData::Direct,
            parallel: false,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_model()?;
        if self.sizes.is_empty() {
            return Err(usage("sizes list is empty"));
        }
        for &s in &self.sizes {
            check_size(s, self.gait.frames)?;
        }
        Ok(())
    }

    /// Everything except the size list, which an explicit size overrides.
    fn validate_model(&self) -> Result<()> {
        self.biped.validate()?;
        self.gait.validate(&self.biped)?;
        Ok(self.training.validate()?)
    }

    /// The training configuration with the run seed applied.
    pub fn training(&self) -> TrainingConfig {
        TrainingConfig {
            seed: self.seed,
            ..self.training.clone()
        }
    }

    fn assembly_options(&self) -> AssemblyOptions {
        AssemblyOptions {
            training: self.training(),
            right_leg: self.right_leg,
            parallel: self.parallel,
        }
    }

    pub fn largest_size(&self) -> usize {
        self.sizes.iter().copied().max().unwrap_or(0)
    }

    pub fn gait_path(&self) -> PathBuf {
        self.out.join("gait.csv")
    }

    pub fn assembly_path(&self) -> PathBuf {
        self.out.join("assembly.json")
    }

    pub fn curve_path(&self) -> PathBuf {
        self.out.join("curve.csv")
    }

    pub fn surface_paths(&self, c: ControllerId, o: SignalId) -> (PathBuf, PathBuf) {
        let stem = format!("surface_{c}_{o}");
        (
            self.out.join(format!("{stem}.csv")),
            self.out.join(format!("{stem}.json")),
        )
    }
}

fn check_size(size: usize, frames: usize) -> Result<()> {
    if size == 0 || size > frames {
        return Err(usage(format!("size {size} must lie in 1..={frames}")));
    }
    Ok(())
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn gait(cfg: &RunConfig) -> Result<GaitCycle> {
    Ok(generate_reference_gait(&cfg.biped, &cfg.gait)?)
}

pub fn cmd_gait(cfg: &RunConfig) -> Result<String> {
    cfg.biped.validate()?;
    cfg.gait.validate(&cfg.biped)?;
    let g = gait(cfg)?;
    let path = cfg.gait_path();
    write(&path, &g.to_csv())?;
    Ok(format!(
        "frames: {}\nstep length: {}\nwrote {}\n",
        g.len(),
        g.step_length(),
        path.display()
    ))
}

#[derive(Serialize)]
struct UnitSummary {
    final_sse: f64,
    best_epoch: usize,
    held_out_sse: Option<f64>,
}

/// Trains the full assembly at `size` (default: the largest configured size).
pub fn cmd_train(cfg: &RunConfig, size: Option<usize>) -> Result<String> {
    let size = match size {
        Some(s) => {
            cfg.validate_model()?;
            s
        }
        None => {
            cfg.validate()?;
            cfg.largest_size()
        }
    };
    check_size(size, cfg.gait.frames)?;
    let g = gait(cfg)?;
    let (assembly, reports) = train_assembly(&g, size, &cfg.assembly_options())?;
    write(&cfg.assembly_path(), &assembly.to_json()?)?;
    let mut summary = BTreeMap::new();
    let mut out = format!(
        "trained {} units on {size} samples\n",
        assembly.unit_count()
    );
    for ((c, o), r) in &reports {
        write(
            &cfg.out.join("epochs").join(format!("{c}_{o}.csv")),
            &r.to_csv(),
        )?;
        summary.insert(
            format!("{c}/{o}"),
            UnitSummary {
                final_sse: r.final_sse,
                best_epoch: r.best_epoch,
                held_out_sse: r.index,
            },
        );
        let _ = writeln!(
            out,
            "{c} {o:<9} train {:.3e}  held-out {:.3e}",
            r.final_sse,
            r.index.unwrap_or(f64::NAN)
        );
    }
    write(
        &cfg.out.join("training_summary.json"),
        &serde_json::to_string_pretty(&summary)?,
    )?;
    let _ = writeln!(out, "wrote {}", cfg.assembly_path().display());
    Ok(out)
}

pub fn cmd_curve(cfg: &RunConfig) -> Result<String> {
    cfg.validate()?;
    let g = gait(cfg)?;
    let rows = sse_curve(&g, &cfg.sizes, &cfg.assembly_options())?;
    write(&cfg.curve_path(), &curve_to_csv(&rows))?;
    let mut out = String::new();
    for r in &rows {
        let _ = writeln!(
            out,
            "{} {:<9} {:>4} {:.3e}",
            r.controller, r.output, r.size, r.sse
        );
    }
    let _ = writeln!(out, "wrote {}", cfg.curve_path().display());
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceRequest {
    pub controller: String,
    pub output: String,
    pub free: [String; 2],
    /// `signal=value` pairs.
    pub fixed: Vec<String>,
    pub resolution: usize,
    /// Bundle to read; defaults to the run's `assembly.json`.
    pub bundle: Option<PathBuf>,
}

fn parse_signal(s: &str) -> Result<SignalId> {
    s.trim()
        .parse()
        .map_err(|e: hflc_core::Error| usage(e.to_string()))
}

pub fn cmd_surface(cfg: &RunConfig, req: &SurfaceRequest) -> Result<String> {
    let controller: ControllerId = req
        .controller
        .parse()
        .map_err(|e: hflc_core::Error| usage(e.to_string()))?;
    let output = parse_signal(&req.output)?;
    let free = [parse_signal(&req.free[0])?, parse_signal(&req.free[1])?];
    let mut fixed = BTreeMap::new();
    for pair in &req.fixed {
        let Some((name, value)) = pair.split_once('=') else {
            bail!(usage(format!("fixed value {pair:?} is not signal=value")));
        };
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| usage(format!("fixed value {value:?} is not a number")))?;
        fixed.insert(parse_signal(name)?, v);
    }
    let bundle = req.bundle.clone().unwrap_or_else(|| cfg.assembly_path());
    let text = fs::read_to_string(&bundle)
        .with_context(|| format!("reading bundle {}", bundle.display()))?;
    let assembly = HflcAssembly::from_json(&text)
        .with_context(|| format!("loading bundle {}", bundle.display()))?;
    let surface = surface_grid(&assembly, controller, output, free, &fixed, req.resolution)
        .map_err(|e| match e {
            hflc_core::Error::Signal(m) | hflc_core::Error::InvalidConfig(m) => usage(m),
            other => other.into(),
        })?;
    let (csv, json) = cfg.surface_paths(controller, output);
    write(&csv, &surface.to_csv())?;
    write(&json, &surface.sidecar_json()?)?;
    Ok(format!(
        "{} x {} grid of {controller}/{output} over ({}, {})\nwrote {}\nwrote {}\n",
        req.resolution,
        req.resolution,
        free[0],
        free[1],
        csv.display(),
        json.display()
    ))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuleCount {
    pub structure: &'static str,
    /// `None` on u64 overflow.
    pub rules: Option<u64>,
}

pub const TOPOLOGIES: [&str; 3] = ["raju", "jellali", "joo"];

/// Flat rule count followed by the requested hierarchies (all when `None`).
pub fn rule_counts(n: usize, m: usize, topology: Option<&str>) -> Result<Vec<RuleCount>> {
    if n < 2 || m < 2 {
        return Err(usage(format!("need n >= 2 and m >= 2, got n={n}, m={m}")));
    }
    let wanted: Vec<&'static str> = match topology {
        None => TOPOLOGIES.to_vec(),
        Some(t) => vec![*TOPOLOGIES.iter().find(|k| **k == t).ok_or_else(|| {
            usage(format!(
                "unknown topology {t:?}; expected raju, jellali or joo"
            ))
        })?],
    };
    let overflow_as_none = |r: hflc_core::Result<u64>| match r {
        Ok(v) => Ok(Some(v)),
        Err(hflc_core::Error::CountOverflow) => Ok(None),
        Err(e) => Err(e),
    };
    let mut rows = vec![RuleCount {
        structure: "flat",
        rules: overflow_as_none(flat_rule_count(n, m))?,
    }];
    for t in wanted {
        let plan = match t {
            "raju" => HierarchyPlan::raju_even(n)?,
            "jellali" => HierarchyPlan::jellali(n)?,
            _ => HierarchyPlan::joo(n, 2)?,
        };
        rows.push(RuleCount {
            structure: t,
            rules: overflow_as_none(plan.uniform_rule_count(m))?,
        });
    }
    Ok(rows)
}

/// Prints the comparison table; any overflowing row makes the command fail
/// after the table is shown.
pub fn cmd_count_rules(
    n: usize,
    m: usize,
    topology: Option<&str>,
) -> Result<(String, Option<anyhow::Error>)> {
    let rows = rule_counts(n, m, topology)?;
    let mut out = format!("n={n} m={m}\n");
    for r in &rows {
        match r.rules {
            Some(v) => writeln!(out, "{}={v}", r.structure)?,
            None => writeln!(out, "{}=overflow", r.structure)?,
        }
    }
    let failed = rows.iter().any(|r| r.rules.is_none());
    Ok((out, failed.then(|| hflc_core::Error::CountOverflow.into())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_for_seven_inputs() {
        let rows = rule_counts(7, 3, None).unwrap();
        assert_eq!(
            rows[0],
            RuleCount {
                structure: "flat",
                rules: Some(2187)
            }
        );
        assert_eq!(
            rows[2],
            RuleCount {
                structure: "jellali",
                rules: Some(54)
            }
        );
    }

    #[test]
    fn overflow_is_flagged() {
        let (text, err) = cmd_count_rules(64, 3, Some("jellali")).unwrap();
        assert!(text.contains("flat=overflow"));
        assert!(text.contains("jellali=567"));
        assert_eq!(exit_code(&err.unwrap()), EXIT_NUMERIC);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&usage("x")), EXIT_USAGE);
        let io: anyhow::Error = std::io::Error::other("disk").into();
        assert_eq!(exit_code(&io.context("writing")), EXIT_IO);
        let div: anyhow::Error = hflc_core::Error::Divergence { epoch: 3 }.into();
        assert_eq!(exit_code(&div), EXIT_NUMERIC);
        let cfg: anyhow::Error = hflc_core::Error::InvalidConfig("bad".into()).into();
        assert_eq!(exit_code(&cfg), EXIT_USAGE);
    }

    #[test]
    fn config_document_is_partial() {
        let cfg: RunConfig =
            serde_json::from_str(r#"{"sizes":[10],"gait":{"frames":20}}"#).unwrap();
        assert_eq!(cfg.sizes, [10]);
        assert_eq!(cfg.gait.frames, 20);
        assert_eq!(cfg.gait.step_length, 0.3);
        cfg.validate().unwrap();
        let bad = RunConfig {
            sizes: vec![30],
            ..cfg
        };
        assert!(bad.validate().is_err());
    }
}
