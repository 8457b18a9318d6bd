use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::membership::{MembershipFunction, MfKind};
use crate::error::{Error, Result};

/// Closed interval `[lo, hi]` with `lo < hi`. Serialized as a two-element array.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl TryFrom<[f64; 2]> for Interval {
    type Error = Error;

    fn try_from([lo, hi]: [f64; 2]) -> Result<Self> {
        Interval::new(lo, hi)
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.lo, i.hi]
    }
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidVariable(format!(
                "universe needs finite lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn span(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    /// The `i`-th of `m` evenly spaced points from `lo` to `hi` inclusive.
    ///
    /// Written as a weighted sum of both ends so that the grid of a
    /// reflected interval is exactly the reflected grid.
    pub fn grid_point(&self, i: usize, m: usize) -> f64 {
        debug_assert!(m >= 2 && i < m);
        let k = (m - 1) as f64;
        ((k - i as f64) * self.lo + i as f64 * self.hi) / k
    }
}

/// A named input with its universe of discourse and ordered terms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawVariable")]
pub struct LinguisticVariable {
    name: String,
    universe: Interval,
    terms: Vec<MembershipFunction>,
}

#[derive(Deserialize)]
struct RawVariable {
    name: String,
    universe: Interval,
    terms: Vec<MembershipFunction>,
}

impl TryFrom<RawVariable> for LinguisticVariable {
    type Error = Error;

    // Training may carry terms past the universe, so loading skips the
    // support check that hand-built variables get.
    fn try_from(raw: RawVariable) -> Result<Self> {
        LinguisticVariable::build(raw.name, raw.universe, raw.terms, false)
    }
}

impl LinguisticVariable {
    /// Rejects duplicate labels and terms whose support misses `universe`.
    pub fn new(
        name: impl Into<String>,
        universe: Interval,
        terms: Vec<MembershipFunction>,
    ) -> Result<Self> {
        Self::build(name, universe, terms, true)
    }

    fn build(
        name: impl Into<String>,
        universe: Interval,
        terms: Vec<MembershipFunction>,
        check_support: bool,
    ) -> Result<Self> {
        let name = name.into();
        if terms.is_empty() {
            return Err(Error::InvalidVariable(format!("`{name}` has no terms")));
        }
        let mut seen = HashSet::new();
        for t in &terms {
            if !seen.insert(t.label()) {
                return Err(Error::InvalidVariable(format!(
                    "`{name}` has duplicate term label `{}`",
                    t.label()
                )));
            }
            let (lo, hi) = t.effective_support();
            if check_support && (hi < universe.lo() || lo > universe.hi()) {
                return Err(Error::InvalidVariable(format!(
                    "term `{}` of `{name}` lies outside [{}, {}]",
                    t.label(),
                    universe.lo(),
                    universe.hi()
                )));
            }
        }
        Ok(Self {
            name,
            universe,
            terms,
        })
    }

    /// Variable with `m` evenly spread terms of the given kind.
    pub fn grid(
        name: impl Into<String>,
        universe: Interval,
        m: usize,
        kind: MfKind,
    ) -> Result<Self> {
        Self::new(name, universe, grid_partition(universe, m, kind)?)
    }

    /// Mirror image about `x = axis`. Term `i` stays at index `i` (so rule
    /// antecedents keep their meaning) and takes the label of term `m-1-i`.
    pub fn reflected(&self, axis: f64, name: impl Into<String>) -> Result<Self> {
        let u = Interval::new(2.0 * axis - self.universe.hi, 2.0 * axis - self.universe.lo)?;
        let m = self.terms.len();
        let terms = self
            .terms
            .iter()
            .enumerate()
            .map(|(i, t)| t.reflected(axis, self.terms[m - 1 - i].label()))
            .collect();
        Self::build(name, u, terms, false)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn universe(&self) -> Interval {
        self.universe
    }

    pub fn terms(&self) -> &[MembershipFunction] {
        &self.terms
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub(crate) fn terms_mut(&mut self) -> &mut [MembershipFunction] {
        &mut self.terms
    }
}

fn term_labels(m: usize) -> Vec<String> {
    let fixed: &[&str] = match m {
        2 => &["low", "high"],
        3 => &["low", "medium", "high"],
        5 => &["very-low", "low", "medium", "high", "very-high"],
        7 => &["nb", "nm", "ns", "ze", "ps", "pm", "pb"],
        _ => &[],
    };
    if fixed.is_empty() {
        (1..=m).map(|i| format!("t{i}")).collect()
    } else {
        fixed.iter().map(|s| s.to_string()).collect()
    }
}

/// `m` terms centred on an even grid over `universe`, adjacent terms
/// crossing at degree 0.5.
pub fn grid_partition(
    universe: Interval,
    m: usize,
    kind: MfKind,
) -> Result<Vec<MembershipFunction>> {
    if m < 2 {
        return Err(Error::Partition(format!("need at least 2 terms, got {m}")));
    }
    let half = universe.span() / (m - 1) as f64 / 2.0;
    let centers: Vec<f64> = (0..m).map(|i| universe.grid_point(i, m)).collect();
    let labels = term_labels(m);
    centers
        .iter()
        .zip(labels)
        .enumerate()
        .map(|(i, (&c, label))| match kind {
            // exp(-half^2 / (2 sigma^2)) = 1/2
            MfKind::Gaussian => {
                MembershipFunction::gaussian(label, c, half / (2.0 * std::f64::consts::LN_2).sqrt())
            }
            // a bell is exactly 1/2 at distance `a` for any slope
            MfKind::GeneralizedBell => MembershipFunction::bell(label, half, 2.0, c),
            MfKind::Triangular => {
                let left = if i == 0 { c } else { centers[i - 1] };
                let right = if i + 1 == m { c } else { centers[i + 1] };
                MembershipFunction::triangular(label, left, c, right)
            }
        })
        .collect()
}
