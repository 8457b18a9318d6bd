use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Family of a membership function.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MfKind {
    Gaussian,
    GeneralizedBell,
    Triangular,
}

impl MfKind {
    pub fn name(self) -> &'static str {
        match self {
            MfKind::Gaussian => "gaussian",
            MfKind::GeneralizedBell => "generalized-bell",
            MfKind::Triangular => "triangular",
        }
    }

    pub fn param_count(self) -> usize {
        match self {
            MfKind::Gaussian => 2,
            MfKind::GeneralizedBell | MfKind::Triangular => 3,
        }
    }

    /// Smooth kinds admit analytic premise gradients.
    pub fn is_differentiable(self) -> bool {
        !matches!(self, MfKind::Triangular)
    }
}

impl std::str::FromStr for MfKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(MfKind::Gaussian),
            "generalized-bell" | "bell" => Ok(MfKind::GeneralizedBell),
            "triangular" => Ok(MfKind::Triangular),
            other => Err(Error::InvalidMembership(format!("unknown kind `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Shape {
    Gaussian { center: f64, sigma: f64 },
    Bell { a: f64, b: f64, c: f64 },
    Triangular { left: f64, peak: f64, right: f64 },
}

/// A labelled fuzzy term.
///
/// Parameter order is fixed per kind and is the order used by
/// [`MembershipFunction::params`], premise gradients and the JSON document:
/// gaussian `[c, sigma]`, generalized bell `[a, b, c]`, triangular
/// `[left, peak, right]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMembership", into = "RawMembership")]
pub struct MembershipFunction {
    shape: Shape,
    label: String,
}

#[derive(Serialize, Deserialize)]
struct RawMembership {
    kind: MfKind,
    params: Vec<f64>,
    label: String,
}

impl TryFrom<RawMembership> for MembershipFunction {
    type Error = Error;

    fn try_from(raw: RawMembership) -> Result<Self> {
        MembershipFunction::from_params(raw.kind, &raw.params, raw.label)
    }
}

impl From<MembershipFunction> for RawMembership {
    fn from(mf: MembershipFunction) -> Self {
        RawMembership {
            kind: mf.kind(),
            params: mf.params(),
            label: mf.label,
        }
    }
}

fn check_label(label: &str) -> Result<()> {
    if label.trim().is_empty() {
        return Err(Error::InvalidMembership("label must be nonempty".into()));
    }
    Ok(())
}

fn check_finite(params: &[f64]) -> Result<()> {
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::InvalidMembership(format!(
            "non-finite parameter in {params:?}"
        )));
    }
    Ok(())
}

impl MembershipFunction {
    pub fn gaussian(label: impl Into<String>, center: f64, sigma: f64) -> Result<Self> {
        let label = label.into();
        check_label(&label)?;
        check_finite(&[center, sigma])?;
        if sigma <= 0.0 {
            return Err(Error::InvalidMembership(format!(
                "gaussian sigma must be positive, got {sigma}"
            )));
        }
        Ok(Self {
            shape: Shape::Gaussian { center, sigma },
            label,
        })
    }

    /// Generalized bell `1 / (1 + |(x - c) / a|^(2b))`.
    pub fn bell(label: impl Into<String>, a: f64, b: f64, c: f64) -> Result<Self> {
        let label = label.into();
        check_label(&label)?;
        check_finite(&[a, b, c])?;
        if a <= 0.0 || b <= 0.0 {
            return Err(Error::InvalidMembership(format!(
                "bell width and slope must be positive, got a={a}, b={b}"
            )));
        }
        Ok(Self {
            shape: Shape::Bell { a, b, c },
            label,
        })
    }

    pub fn triangular(label: impl Into<String>, left: f64, peak: f64, right: f64) -> Result<Self> {
        let label = label.into();
        check_label(&label)?;
        check_finite(&[left, peak, right])?;
        if !(left <= peak && peak <= right && left < right) {
            return Err(Error::InvalidMembership(format!(
                "triangular needs left <= peak <= right and left < right, got ({left}, {peak}, {right})"
            )));
        }
        Ok(Self {
            shape: Shape::Triangular { left, peak, right },
            label,
        })
    }

    pub fn from_params(kind: MfKind, params: &[f64], label: impl Into<String>) -> Result<Self> {
        if params.len() != kind.param_count() {
            return Err(Error::InvalidMembership(format!(
                "{} takes {} parameters, got {}",
                kind.name(),
                kind.param_count(),
                params.len()
            )));
        }
        match kind {
            MfKind::Gaussian => Self::gaussian(label, params[0], params[1]),
            MfKind::GeneralizedBell => Self::bell(label, params[0], params[1], params[2]),
            MfKind::Triangular => Self::triangular(label, params[0], params[1], params[2]),
        }
    }

    pub fn kind(&self) -> MfKind {
        match self.shape {
            Shape::Gaussian { .. } => MfKind::Gaussian,
            Shape::Bell { .. } => MfKind::GeneralizedBell,
            Shape::Triangular { .. } => MfKind::Triangular,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn params(&self) -> Vec<f64> {
        match self.shape {
            Shape::Gaussian { center, sigma } => vec![center, sigma],
            Shape::Bell { a, b, c } => vec![a, b, c],
            Shape::Triangular { left, peak, right } => vec![left, peak, right],
        }
    }

    /// Replaces the parameters, keeping kind and label.
    pub fn with_params(&self, params: &[f64]) -> Result<Self> {
        Self::from_params(self.kind(), params, self.label.clone())
    }

    /// Mirror image about `x = axis`, relabelled.
    pub fn reflected(&self, axis: f64, label: impl Into<String>) -> Self {
        let r = |v: f64| 2.0 * axis - v;
        let shape = match self.shape {
            Shape::Gaussian { center, sigma } => Shape::Gaussian {
                center: r(center),
                sigma,
            },
            Shape::Bell { a, b, c } => Shape::Bell { a, b, c: r(c) },
            Shape::Triangular { left, peak, right } => Shape::Triangular {
                left: r(right),
                peak: r(peak),
                right: r(left),
            },
        };
        Self {
            shape,
            label: label.into(),
        }
    }

    /// Point of full membership.
    pub fn center(&self) -> f64 {
        match self.shape {
            Shape::Gaussian { center, .. } => center,
            Shape::Bell { c, .. } => c,
            Shape::Triangular { peak, .. } => peak,
        }
    }

    /// Membership degree in `[0, 1]`.
    pub fn degree(&self, x: f64) -> f64 {
        match self.shape {
            Shape::Gaussian { center, sigma } => {
                let d = x - center;
                (-(d * d) / (2.0 * sigma * sigma)).exp()
            }
            Shape::Bell { a, b, c } => {
                let t = ((x - c) / a).abs().powf(2.0 * b);
                1.0 / (1.0 + t)
            }
            Shape::Triangular { left, peak, right } => {
                if x < left || x > right {
                    0.0
                } else if x <= peak {
                    if peak == left {
                        1.0
                    } else {
                        (x - left) / (peak - left)
                    }
                } else if right == peak {
                    1.0
                } else {
                    (right - x) / (right - peak)
                }
            }
        }
    }

    /// Writes `d degree / d param` into `out` (in [`params`](Self::params)
    /// order) and returns the degree.
    pub fn degree_and_gradient(&self, x: f64, out: &mut [f64]) -> Result<f64> {
        match self.shape {
            Shape::Gaussian { center, sigma } => {
                let d = x - center;
                let s2 = sigma * sigma;
                let mu = (-(d * d) / (2.0 * s2)).exp();
                out[0] = mu * d / s2;
                out[1] = mu * d * d / (s2 * sigma);
                Ok(mu)
            }
            Shape::Bell { a, b, c } => {
                let z = (x - c) / a;
                let az = z.abs();
                let t = az.powf(2.0 * b);
                let mu = 1.0 / (1.0 + t);
                let k = -mu * mu;
                // dt/da, dt/db, dt/dc
                let dt_da = -2.0 * b * t / a;
                let dt_db = if az > 0.0 { 2.0 * t * az.ln() } else { 0.0 };
                let dt_dc = if az > 0.0 {
                    -(2.0 * b / a) * az.powf(2.0 * b - 1.0) * z.signum()
                } else {
                    0.0
                };
                out[0] = k * dt_da;
                out[1] = k * dt_db;
                out[2] = k * dt_dc;
                Ok(mu)
            }
            Shape::Triangular { .. } => Err(Error::UnsupportedKind {
                operation: "premise gradient",
                kind: MfKind::Triangular.name(),
            }),
        }
    }

    /// Interval outside of which the degree is negligible (below ~1e-3 for
    /// the smooth kinds, exactly zero for triangles).
    pub fn effective_support(&self) -> (f64, f64) {
        match self.shape {
            Shape::Gaussian { center, sigma } => (center - 4.0 * sigma, center + 4.0 * sigma),
            Shape::Bell { a, b, c } => {
                let reach = a * 999f64.powf(1.0 / (2.0 * b));
                (c - reach, c + reach)
            }
            Shape::Triangular { left, right, .. } => (left, right),
        }
    }
}

/// Degree of `x` in `mf`.
pub fn membership_degree(mf: &MembershipFunction, x: f64) -> f64 {
    mf.degree(x)
}
