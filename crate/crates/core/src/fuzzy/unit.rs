use serde::{Deserialize, Serialize};

use super::variable::LinguisticVariable;
use crate::error::{Error, Result};

/// First-order Takagi-Sugeno rule.
///
/// `antecedent[i]` picks a term of input `i`; `consequent` holds
/// `[p_1, .., p_n, r]` so that the rule output is `p . x + r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TskRule {
    pub antecedent: Vec<usize>,
    pub consequent: Vec<f64>,
}

impl TskRule {
    pub fn output(&self, x: &[f64]) -> f64 {
        let (r, p) = self.consequent.split_last().expect("validated consequent");
        p.iter().zip(x).fold(*r, |acc, (p, x)| acc + p * x)
    }
}

/// A multi-input, single-output TSK inference unit with product conjunction
/// and weighted-average defuzzification.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawUnit")]
pub struct FuzzyLogicUnit {
    inputs: Vec<LinguisticVariable>,
    rules: Vec<TskRule>,
}

#[derive(Deserialize)]
struct RawUnit {
    inputs: Vec<LinguisticVariable>,
    rules: Vec<TskRule>,
}

impl TryFrom<RawUnit> for FuzzyLogicUnit {
    type Error = Error;

    fn try_from(raw: RawUnit) -> Result<Self> {
        FuzzyLogicUnit::new(raw.inputs, raw.rules)
    }
}

impl FuzzyLogicUnit {
    pub fn new(inputs: Vec<LinguisticVariable>, rules: Vec<TskRule>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::InvalidUnit("a unit needs at least one input".into()));
        }
        if rules.is_empty() {
            return Err(Error::InvalidUnit("a unit needs at least one rule".into()));
        }
        let n = inputs.len();
        for (k, rule) in rules.iter().enumerate() {
            if rule.antecedent.len() != n {
                return Err(Error::InvalidUnit(format!(
                    "rule {k} has {} antecedent terms for {n} inputs",
                    rule.antecedent.len()
                )));
            }
            if rule.consequent.len() != n + 1 {
                return Err(Error::InvalidUnit(format!(
                    "rule {k} has {} consequent coefficients, expected {}",
                    rule.consequent.len(),
                    n + 1
                )));
            }
            for (i, (&t, var)) in rule.antecedent.iter().zip(&inputs).enumerate() {
                if t >= var.term_count() {
                    return Err(Error::InvalidUnit(format!(
                        "rule {k} references term {t} of input {i} (`{}`), which has {} terms",
                        var.name(),
                        var.term_count()
                    )));
                }
            }
            if rule.consequent.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidUnit(format!(
                    "rule {k} has a non-finite consequent"
                )));
            }
        }
        Ok(Self { inputs, rules })
    }

    /// One rule per combination of input terms, all consequents zero.
    /// Rules are enumerated in row-major order (last input varies fastest).
    pub fn grid(inputs: Vec<LinguisticVariable>) -> Result<Self> {
        let sizes: Vec<usize> = inputs.iter().map(|v| v.term_count()).collect();
        let n = inputs.len();
        let total = sizes
            .iter()
            .try_fold(1usize, |acc, &m| acc.checked_mul(m))
            .ok_or(Error::CountOverflow)?;
        let mut rules = Vec::with_capacity(total);
        let mut idx = vec![0usize; n];
        for _ in 0..total {
            rules.push(TskRule {
                antecedent: idx.clone(),
                consequent: vec![0.0; n + 1],
            });
            for i in (0..n).rev() {
                idx[i] += 1;
                if idx[i] < sizes[i] {
                    break;
                }
                idx[i] = 0;
            }
        }
        Self::new(inputs, rules)
    }

    /// Unit computing the same function of reflected inputs: input `i` with
    /// `axes[i] = Some(a)` is replaced by `2a - x_i` and renamed `names[i]`.
    /// Rule order is preserved.
    pub fn reflect_inputs(&self, axes: &[Option<f64>], names: &[&str]) -> Result<Self> {
        let n = self.arity();
        if axes.len() != n || names.len() != n {
            return Err(Error::Arity {
                expected: n,
                got: axes.len().min(names.len()),
            });
        }
        let inputs = self
            .inputs
            .iter()
            .zip(axes.iter().zip(names))
            .map(|(v, (axis, name))| match axis {
                Some(a) => v.reflected(*a, *name),
                None => LinguisticVariable::new(*name, v.universe(), v.terms().to_vec()),
            })
            .collect::<Result<Vec<_>>>()?;
        // p x + r = p (2a - x') + r  =>  p' = -p, r' = r + 2 a p
        let rules = self
            .rules
            .iter()
            .map(|rule| {
                let mut c = rule.consequent.clone();
                for (i, axis) in axes.iter().enumerate() {
                    if let Some(a) = axis {
                        c[n] += 2.0 * a * c[i];
                        c[i] = -c[i];
                    }
                }
                TskRule {
                    antecedent: rule.antecedent.clone(),
                    consequent: c,
                }
            })
            .collect();
        Self::new(inputs, rules)
    }

    pub fn arity(&self) -> usize {
        self.inputs.len()
    }

    pub fn inputs(&self) -> &[LinguisticVariable] {
        &self.inputs
    }

    pub fn rules(&self) -> &[TskRule] {
        &self.rules
    }

    pub fn rule_count(&self) -> usize {
        self.rules.len()
    }

    /// True when the rule base holds every antecedent combination exactly once.
    pub fn is_grid_complete(&self) -> bool {
        let expected: usize = self.inputs.iter().map(|v| v.term_count()).product();
        if self.rules.len() != expected {
            return false;
        }
        let mut seen: Vec<&[usize]> = self.rules.iter().map(|r| r.antecedent.as_slice()).collect();
        seen.sort_unstable();
        seen.windows(2).all(|w| w[0] != w[1])
    }

    fn check_arity(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.arity() {
            return Err(Error::Arity {
                expected: self.arity(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Degrees of every term of every input at `x`.
    pub(crate) fn term_degrees(&self, x: &[f64]) -> Vec<Vec<f64>> {
        self.inputs
            .iter()
            .zip(x)
            .map(|(v, &xi)| v.terms().iter().map(|t| t.degree(xi)).collect())
            .collect()
    }

    pub(crate) fn strengths_from(&self, degrees: &[Vec<f64>], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.rules.iter().map(|r| {
            r.antecedent
                .iter()
                .zip(degrees)
                .fold(1.0, |acc, (&t, d)| acc * d[t])
        }));
    }

    /// Firing strength of every rule at `x`.
    pub fn strengths(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_arity(x)?;
        let mut w = Vec::with_capacity(self.rules.len());
        self.strengths_from(&self.term_degrees(x), &mut w);
        Ok(w)
    }

    /// Product of the antecedent degrees of rule `k`.
    pub fn fire_strength(&self, k: usize, x: &[f64]) -> Result<f64> {
        self.check_arity(x)?;
        let rule = self.rules.get(k).ok_or_else(|| {
            Error::InvalidUnit(format!(
                "rule index {k} out of range ({} rules)",
                self.rules.len()
            ))
        })?;
        Ok(rule
            .antecedent
            .iter()
            .zip(&self.inputs)
            .zip(x)
            .map(|((&t, var), &xi)| var.terms()[t].degree(xi))
            .product())
    }

    /// Strict inference: an input that fires no rule is an error.
    pub fn infer(&self, x: &[f64]) -> Result<f64> {
        let w = self.strengths(x)?;
        let total: f64 = w.iter().sum();
        if total <= 0.0 {
            return Err(Error::ZeroFiring {
                row: None,
                node: None,
            });
        }
        // normalise first: a lone rule then has weight exactly 1
        Ok(w.iter()
            .zip(&self.rules)
            .map(|(w, r)| (w / total) * r.output(x))
            .sum())
    }

    /// Clamps every input to its universe, then infers.
    pub fn infer_clamped(&self, x: &[f64]) -> Result<f64> {
        self.check_arity(x)?;
        self.infer(&self.clamp_input(x))
    }

    pub fn clamp_input(&self, x: &[f64]) -> Vec<f64> {
        self.inputs
            .iter()
            .zip(x)
            .map(|(v, &xi)| v.universe().clamp(xi))
            .collect()
    }

    /// All consequent coefficients, rule by rule.
    pub fn consequent_params(&self) -> Vec<f64> {
        self.rules
            .iter()
            .flat_map(|r| r.consequent.iter().copied())
            .collect()
    }

    pub fn set_consequent_params(&mut self, params: &[f64]) -> Result<()> {
        let per = self.arity() + 1;
        if params.len() != per * self.rules.len() {
            return Err(Error::InvalidUnit(format!(
                "expected {} consequent coefficients, got {}",
                per * self.rules.len(),
                params.len()
            )));
        }
        for (rule, chunk) in self.rules.iter_mut().zip(params.chunks_exact(per)) {
            rule.consequent.copy_from_slice(chunk);
        }
        Ok(())
    }

    /// All membership parameters, input by input, term by term.
    pub fn premise_params(&self) -> Vec<f64> {
        self.inputs
            .iter()
            .flat_map(|v| v.terms().iter().flat_map(|t| t.params()))
            .collect()
    }

    pub fn premise_param_count(&self) -> usize {
        self.inputs
            .iter()
            .flat_map(|v| v.terms())
            .map(|t| t.kind().param_count())
            .sum()
    }

    /// Replaces the membership parameters; fails if any term would become invalid.
    pub fn set_premise_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.premise_param_count() {
            return Err(Error::InvalidUnit(format!(
                "expected {} premise parameters, got {}",
                self.premise_param_count(),
                params.len()
            )));
        }
        let mut updated = self.inputs.clone();
        let mut offset = 0;
        for var in &mut updated {
            for term in var.terms_mut() {
                let n = term.kind().param_count();
                *term = term.with_params(&params[offset..offset + n])?;
                offset += n;
            }
        }
        self.inputs = updated;
        Ok(())
    }
}

/// Firing strength of `rule` inside `flu` at `x`.
pub fn fire_strength(rule: &TskRule, flu: &FuzzyLogicUnit, x: &[f64]) -> Result<f64> {
    flu.check_arity(x)?;
    if rule.antecedent.len() != flu.arity() {
        return Err(Error::Arity {
            expected: flu.arity(),
            got: rule.antecedent.len(),
        });
    }
    let mut w = 1.0;
    for ((&t, var), &xi) in rule.antecedent.iter().zip(flu.inputs()).zip(x) {
        let term = var.terms().get(t).ok_or_else(|| {
            Error::InvalidUnit(format!("term {t} out of range for `{}`", var.name()))
        })?;
        w *= term.degree(xi);
    }
    Ok(w)
}

/// `m^n`, the size of a complete rule grid over `n` inputs with `m` terms each.
pub fn flat_rule_count(n: usize, m: usize) -> Result<u64> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidConfig(format!(
            "rule count needs n >= 1 and m >= 1, got n={n}, m={m}"
        )));
    }
    let exp = u32::try_from(n).map_err(|_| Error::CountOverflow)?;
    (m as u64).checked_pow(exp).ok_or(Error::CountOverflow)
}
