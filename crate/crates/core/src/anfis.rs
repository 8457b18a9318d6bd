//! Hybrid training of a single unit: least-squares consequents on the
//! forward pass, a normalised gradient step on the membership parameters on
//! the backward pass.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuzzy::{FuzzyLogicUnit, Interval, LinguisticVariable, MfKind};
use crate::io::{fmt_f64, parse_f64, read_csv};

/// Diagonal damping added to the least-squares Gram matrix.
pub const RIDGE: f64 = 1e-9;

/// Input/target rows of uniform arity.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSet {
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
}

impl TrainingSet {
    pub fn new(rows: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        let (inputs, targets) = rows.into_iter().unzip();
        Self::from_columns(inputs, targets)
    }

    pub fn from_columns(inputs: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::InvalidData("training set is empty".into()));
        }
        if inputs.len() != targets.len() {
            return Err(Error::InvalidData(format!(
                "{} input rows but {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        let arity = inputs[0].len();
        if arity == 0 {
            return Err(Error::InvalidData("rows have no inputs".into()));
        }
        for (i, (x, t)) in inputs.iter().zip(&targets).enumerate() {
            if x.len() != arity {
                return Err(Error::InvalidData(format!(
                    "row {i} has {} inputs, expected {arity}",
                    x.len()
                )));
            }
            if !t.is_finite() || x.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidData(format!(
                    "row {i} has a non-finite value"
                )));
            }
        }
        Ok(Self { inputs, targets })
    }

    /// Samples `f` at the given points.
    pub fn from_fn(points: Vec<Vec<f64>>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let targets = points.iter().map(|x| f(x)).collect();
        Self::from_columns(points, targets)
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn arity(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.inputs
            .iter()
            .map(Vec::as_slice)
            .zip(self.targets.iter().copied())
    }

    pub fn column(&self, i: usize) -> impl Iterator<Item = f64> + '_ {
        self.inputs.iter().map(move |x| x[i])
    }

    /// Same inputs, targets replaced by `f(target)`.
    pub fn map_targets(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_columns(
            self.inputs.clone(),
            self.targets.iter().map(|&t| f(t)).collect(),
        )
    }
}

/// Anything that maps an input row to a crisp output.
pub trait Predictor {
    fn input_arity(&self) -> usize;

    /// Inference with inputs clamped to the declared universes.
    fn predict(&self, x: &[f64]) -> Result<f64>;
}

impl Predictor for FuzzyLogicUnit {
    fn input_arity(&self) -> usize {
        self.arity()
    }

    fn predict(&self, x: &[f64]) -> Result<f64> {
        self.infer_clamped(x)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub epochs: usize,
    /// Length of each premise step (the gradient is normalised).
    pub step_size: f64,
    pub step_increase: f64,
    pub step_decrease: f64,
    /// Consecutive SSE decreases that trigger a step increase.
    pub increase_after: usize,
    /// Consecutive up/down alternations that trigger a step decrease.
    pub decrease_after: usize,
    /// Terms per input for grid-initialised units.
    pub terms: usize,
    pub kind: MfKind,
    /// Relative widening of fitted input universes.
    pub margin: f64,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            step_size: 0.01,
            step_increase: 1.1,
            step_decrease: 0.9,
            increase_after: 4,
            decrease_after: 2,
            terms: 3,
            kind: MfKind::GeneralizedBell,
            margin: 0.05,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let rates = [
            self.step_size,
            self.step_increase,
            self.step_decrease,
            self.margin + 1.0,
        ];
        if rates.iter().any(|r| !(r.is_finite() && *r > 0.0)) || self.margin < 0.0 {
            return Err(Error::InvalidConfig(
                "training rates must be positive and finite".into(),
            ));
        }
        if self.terms < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 terms per input, got {}",
                self.terms
            )));
        }
        if self.increase_after == 0 || self.decrease_after == 0 {
            return Err(Error::InvalidConfig(
                "step adaptation windows must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    /// SSE after the initial least-squares pass (entry 0) and after each epoch.
    pub epoch_sse: Vec<f64>,
    /// Training SSE of the returned snapshot; the minimum of `epoch_sse`.
    pub final_sse: f64,
    pub best_epoch: usize,
    /// Cumulative squared-error index: SSE on the designated test set, when one was given.
    pub index: Option<f64>,
    #[serde(skip)]
    pub wall_time: Duration,
}

#[derive(Serialize, Deserialize)]
struct ReportSummary {
    final_sse: f64,
    best_epoch: usize,
    index: Option<f64>,
}

impl TrainingReport {
    pub const CSV_HEADER: &'static str = "epoch,sse";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for (epoch, sse) in self.epoch_sse.iter().enumerate() {
            let _ = writeln!(out, "{epoch},{}", fmt_f64(*sse));
        }
        out
    }

    /// Parses the per-epoch trace written by [`to_csv`](Self::to_csv).
    pub fn epochs_from_csv(text: &str) -> Result<Vec<f64>> {
        read_csv(text, Self::CSV_HEADER)?
            .into_iter()
            .enumerate()
            .map(|(i, f)| {
                if f[0].trim() != i.to_string() {
                    return Err(Error::InvalidData(format!(
                        "epoch column out of order at row {i}"
                    )));
                }
                parse_f64(f[1])
            })
            .collect()
    }

    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ReportSummary {
            final_sse: self.final_sse,
            best_epoch: self.best_epoch,
            index: self.index,
        })?)
    }
}

/// Per-column `[min - margin*span, max + margin*span]`; a constant column
/// becomes `value -/+ 0.5`.
pub fn fit_universes(data: &TrainingSet, margin: f64) -> Vec<Interval> {
    (0..data.arity())
        .map(|i| {
            let (lo, hi) = data
                .column(i)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    (lo.min(v), hi.max(v))
                });
            let span = hi - lo;
            let (lo, hi) = if span > 0.0 {
                (lo - margin * span, hi + margin * span)
            } else {
                (lo - 0.5, hi + 0.5)
            };
            Interval::new(lo, hi).expect("finite data gives a proper interval")
        })
        .collect()
}

/// Grid unit over the fitted universes of `data`, with zero consequents.
pub fn initial_unit(
    names: &[&str],
    data: &TrainingSet,
    cfg: &TrainingConfig,
) -> Result<FuzzyLogicUnit> {
    if names.len() != data.arity() {
        return Err(Error::Arity {
            expected: data.arity(),
            got: names.len(),
        });
    }
    let vars = fit_universes(data, cfg.margin)
        .into_iter()
        .zip(names)
        .map(|(u, name)| LinguisticVariable::grid(*name, u, cfg.terms, cfg.kind))
        .collect::<Result<Vec<_>>>()?;
    FuzzyLogicUnit::grid(vars)
}

fn check_data_arity(flu: &FuzzyLogicUnit, data: &TrainingSet) -> Result<()> {
    if flu.arity() != data.arity() {
        return Err(Error::Arity {
            expected: flu.arity(),
            got: data.arity(),
        });
    }
    Ok(())
}

/// Regressor matrix of the consequent parameters: row `r`, column
/// `k*(n+1) + i` holds the normalised strength of rule `k` times `x_i`
/// (times 1 for the offset column).
fn regressors(flu: &FuzzyLogicUnit, data: &TrainingSet) -> Result<DMatrix<f64>> {
    let n = flu.arity();
    let per = n + 1;
    let cols = flu.rule_count() * per;
    let mut a = DMatrix::zeros(data.len(), cols);
    let mut w = Vec::new();
    for (r, (x, _)) in data.rows().enumerate() {
        flu.strengths_from(&flu.term_degrees(x), &mut w);
        let total: f64 = w.iter().sum();
        if total <= 0.0 {
            return Err(Error::ZeroFiring {
                row: Some(r),
                node: None,
            });
        }
        for (k, wk) in w.iter().enumerate() {
            let nw = wk / total;
            for (i, xi) in x.iter().enumerate() {
                a[(r, k * per + i)] = nw * xi;
            }
            a[(r, k * per + n)] = nw;
        }
    }
    Ok(a)
}

/// Solves `(A^T A + RIDGE I) theta = A^T y`. Wide systems use the equivalent
/// dual form `theta = A^T (A A^T + RIDGE I)^-1 y`, whose Gram matrix is the
/// smaller one.
fn ridge_solve(a: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let (rows, cols) = a.shape();
    if rows >= cols {
        let mut gram = a.tr_mul(a);
        for i in 0..cols {
            gram[(i, i)] += RIDGE;
        }
        let rhs = a.tr_mul(y);
        solve_spd(gram, rhs)
    } else {
        let mut gram = a * a.transpose();
        for i in 0..rows {
            gram[(i, i)] += RIDGE;
        }
        let alpha = solve_spd(gram, y.clone());
        a.tr_mul(&alpha)
    }
}

fn solve_spd(gram: DMatrix<f64>, rhs: DVector<f64>) -> DVector<f64> {
    match gram.clone().cholesky() {
        Some(chol) => chol.solve(&rhs),
        // round-off can leave a damped Gram matrix numerically indefinite
        None => gram
            .svd(true, true)
            .solve(&rhs, f64::EPSILON)
            .expect("SVD with both factors computed"),
    }
}

/// Least-squares consequents for fixed premises.
pub fn lse_consequents(flu: &FuzzyLogicUnit, data: &TrainingSet) -> Result<Vec<f64>> {
    check_data_arity(flu, data)?;
    let a = regressors(flu, data)?;
    let y = DVector::from_column_slice(data.targets());
    Ok(ridge_solve(&a, &y).iter().copied().collect())
}

/// Applies [`lse_consequents`] in place.
pub fn fit_consequents(flu: &mut FuzzyLogicUnit, data: &TrainingSet) -> Result<()> {
    let theta = lse_consequents(flu, data)?;
    flu.set_consequent_params(&theta)
}

/// Analytic gradient of the training SSE with respect to every premise
/// parameter, in [`FuzzyLogicUnit::premise_params`] order.
pub fn premise_gradient(flu: &FuzzyLogicUnit, data: &TrainingSet) -> Result<Vec<f64>> {
    check_data_arity(flu, data)?;
    for v in flu.inputs() {
        for t in v.terms() {
            if !t.kind().is_differentiable() {
                return Err(Error::UnsupportedKind {
                    operation: "premise gradient",
                    kind: t.kind().name(),
                });
            }
        }
    }

    // offsets[i][j]: first parameter index of term j of input i
    let mut offsets = Vec::with_capacity(flu.arity());
    let mut next = 0;
    for v in flu.inputs() {
        offsets.push(
            v.terms()
                .iter()
                .map(|t| {
                    let o = next;
                    next += t.kind().param_count();
                    o
                })
                .collect::<Vec<_>>(),
        );
    }
    let mut grad = vec![0.0; next];

    let rules = flu.rules();
    let mut degrees: Vec<Vec<f64>> = flu
        .inputs()
        .iter()
        .map(|v| vec![0.0; v.term_count()])
        .collect();
    let mut dmu = vec![0.0; next];
    let mut w = Vec::with_capacity(rules.len());
    let mut d_deg: Vec<Vec<f64>> = degrees.clone();

    for (r, (x, target)) in data.rows().enumerate() {
        for (i, v) in flu.inputs().iter().enumerate() {
            for (j, t) in v.terms().iter().enumerate() {
                let o = offsets[i][j];
                let np = t.kind().param_count();
                degrees[i][j] = t.degree_and_gradient(x[i], &mut dmu[o..o + np])?;
            }
        }
        flu.strengths_from(&degrees, &mut w);
        let total: f64 = w.iter().sum();
        if total <= 0.0 {
            return Err(Error::ZeroFiring {
                row: Some(r),
                node: None,
            });
        }
        let outputs: Vec<f64> = rules.iter().map(|rule| rule.output(x)).collect();
        let y: f64 = w.iter().zip(&outputs).map(|(w, f)| (w / total) * f).sum();
        let e2 = 2.0 * (y - target);

        for row in d_deg.iter_mut() {
            row.fill(0.0);
        }
        for (k, rule) in rules.iter().enumerate() {
            // d SSE / d w_k
            let dw = e2 * (outputs[k] - y) / total;
            if dw == 0.0 {
                continue;
            }
            for (i, &ti) in rule.antecedent.iter().enumerate() {
                let others: f64 = rule
                    .antecedent
                    .iter()
                    .enumerate()
                    .filter(|&(i2, _)| i2 != i)
                    .map(|(i2, &t2)| degrees[i2][t2])
                    .product();
                d_deg[i][ti] += dw * others;
            }
        }
        for (i, v) in flu.inputs().iter().enumerate() {
            for (j, t) in v.terms().iter().enumerate() {
                let o = offsets[i][j];
                for p in 0..t.kind().param_count() {
                    grad[o + p] += d_deg[i][j] * dmu[o + p];
                }
            }
        }
    }
    Ok(grad)
}

/// Keeps widths and slopes inside their valid range after a step.
fn project_premises(flu: &FuzzyLogicUnit, params: &mut [f64]) {
    let mut o = 0;
    for v in flu.inputs() {
        let min_width = 1e-4 * v.universe().span();
        for t in v.terms() {
            match t.kind() {
                MfKind::Gaussian => params[o + 1] = params[o + 1].max(min_width),
                MfKind::GeneralizedBell => {
                    params[o] = params[o].max(min_width);
                    params[o + 1] = params[o + 1].max(0.1);
                }
                MfKind::Triangular => {}
            }
            o += t.kind().param_count();
        }
    }
}

/// SSE of strict inference over `data`.
fn training_sse(flu: &FuzzyLogicUnit, data: &TrainingSet) -> Result<f64> {
    let mut sse = 0.0;
    for (r, (x, t)) in data.rows().enumerate() {
        let e = flu.infer(x).map_err(|e| e.at_row(r))? - t;
        sse += e * e;
    }
    Ok(sse)
}

/// Multiplicative step-size schedule driven by the sign pattern of SSE changes.
struct StepSchedule {
    step: f64,
    /// `true` for a decrease, most recent last.
    moves: Vec<bool>,
}

impl StepSchedule {
    fn update(&mut self, cfg: &TrainingConfig, decreased: bool) {
        self.moves.push(decreased);
        let inc = cfg.increase_after;
        let alt = 2 * cfg.decrease_after;
        let n = self.moves.len();
        if n >= inc && self.moves[n - inc..].iter().all(|&d| d) {
            self.step *= cfg.step_increase;
            self.moves.clear();
        } else if n >= alt && self.moves[n - alt..].windows(2).all(|w| w[0] != w[1]) {
            self.step *= cfg.step_decrease;
            self.moves.clear();
        }
    }
}

/// Hybrid training. Each epoch takes one normalised gradient step on the
/// premises and then refits the consequents by least squares; the snapshot
/// with the lowest training SSE is returned.
///
/// Units with triangular terms are fitted by least squares only.
pub fn train_hybrid(
    flu: &FuzzyLogicUnit,
    data: &TrainingSet,
    cfg: &TrainingConfig,
) -> Result<(FuzzyLogicUnit, TrainingReport)> {
    cfg.validate()?;
    check_data_arity(flu, data)?;
    let started = Instant::now();
    let trainable = flu
        .inputs()
        .iter()
        .flat_map(|v| v.terms())
        .all(|t| t.kind().is_differentiable());

    let mut unit = flu.clone();
    fit_consequents(&mut unit, data)?;
    let sse = training_sse(&unit, data)?;
    if !sse.is_finite() {
        return Err(Error::Divergence { epoch: 0 });
    }
    let mut history = vec![sse];
    let mut best = (unit.clone(), sse, 0);
    let mut schedule = StepSchedule {
        step: cfg.step_size,
        moves: Vec::new(),
    };

    for epoch in 1..=cfg.epochs {
        if trainable {
            let grad = premise_gradient(&unit, data)?;
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if !norm.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            if norm > 0.0 {
                let mut p = unit.premise_params();
                for (p, g) in p.iter_mut().zip(&grad) {
                    *p -= schedule.step * g / norm;
                }
                project_premises(&unit, &mut p);
                unit.set_premise_params(&p)?;
            }
        }
        fit_consequents(&mut unit, data)?;
        let sse = training_sse(&unit, data)?;
        if !sse.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        let prev = *history.last().expect("history starts non-empty");
        history.push(sse);
        if sse < best.1 {
            best = (unit.clone(), sse, epoch);
        }
        schedule.update(cfg, sse < prev);
    }

    let (unit, final_sse, best_epoch) = best;
    Ok((
        unit,
        TrainingReport {
            epoch_sse: history,
            final_sse,
            best_epoch,
            index: None,
            wall_time: started.elapsed(),
        },
    ))
}

/// Sum of squared prediction errors over `test`. Inputs are clamped to the
/// model's universes; no row is skipped.
pub fn evaluate_sse<P: Predictor + ?Sized>(model: &P, test: &TrainingSet) -> Result<f64> {
    if model.input_arity() != test.arity() {
        return Err(Error::Arity {
            expected: model.input_arity(),
            got: test.arity(),
        });
    }
    let mut sse = 0.0;
    for (r, (x, t)) in test.rows().enumerate() {
        let e = model.predict(x).map_err(|e| e.at_row(r))? - t;
        sse += e * e;
    }
    Ok(sse)
}
