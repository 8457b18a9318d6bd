//! Five-link planar biped: torso, two thighs, two shanks, point feet.
//!
//! Link angles are absolute, measured from the downward vertical and
//! positive counter-clockwise, so a leg link at angle `q` points along
//! `(sin q, -cos q)`. The torso angle is measured from the upward vertical:
//! the torso points along `(-sin q, cos q)`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{fmt_f64, parse_f64, read_csv};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, o: Point) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }

    fn along(self, angle: f64, len: f64) -> Point {
        Point::new(self.x + len * angle.sin(), self.y - len * angle.cos())
    }

    fn lerp(self, o: Point, t: f64) -> Point {
        Point::new(self.x + t * (o.x - self.x), self.y + t * (o.y - self.y))
    }

    fn reflect(self, axis: f64) -> Point {
        Point::new(2.0 * axis - self.x, self.y)
    }
}

/// Link lengths and masses; both legs share the same dimensions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BipedParams {
    pub thigh: f64,
    pub shank: f64,
    pub torso: f64,
    pub thigh_mass: f64,
    pub shank_mass: f64,
    pub torso_mass: f64,
}

impl Default for BipedParams {
    fn default() -> Self {
        Self {
            thigh: 0.4,
            shank: 0.4,
            torso: 0.6,
            thigh_mass: 1.0,
            shank_mass: 1.0,
            torso_mass: 1.0,
        }
    }
}

impl BipedParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.thigh,
            self.shank,
            self.torso,
            self.thigh_mass,
            self.shank_mass,
            self.torso_mass,
        ];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidConfig(format!(
                "link lengths and masses must be positive: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn leg_length(&self) -> f64 {
        self.thigh + self.shank
    }
}

/// The seven planar degrees of freedom.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointState {
    pub hip: Point,
    pub torso: f64,
    pub beta_left: f64,
    pub gamma_left: f64,
    pub beta_right: f64,
    pub gamma_right: f64,
}

impl JointState {
    /// Reflection about the vertical line `x = axis`: legs swap roles and
    /// every angle changes sign.
    pub fn mirror_about(&self, axis: f64) -> Self {
        Self {
            hip: self.hip.reflect(axis),
            torso: -self.torso,
            beta_left: -self.beta_right,
            gamma_left: -self.gamma_right,
            beta_right: -self.beta_left,
            gamma_right: -self.gamma_left,
        }
    }

    /// Reflection about the hip vertical.
    pub fn mirror(&self) -> Self {
        self.mirror_about(self.hip.x)
    }

    /// Exchanges the legs without reflecting anything.
    pub fn swap_legs(&self) -> Self {
        Self {
            beta_left: self.beta_right,
            gamma_left: self.gamma_right,
            beta_right: self.beta_left,
            gamma_right: self.gamma_left,
            ..*self
        }
    }

    fn lerp(&self, o: &JointState, t: f64) -> Self {
        let l = |a: f64, b: f64| a + t * (b - a);
        Self {
            hip: self.hip.lerp(o.hip, t),
            torso: l(self.torso, o.torso),
            beta_left: l(self.beta_left, o.beta_left),
            gamma_left: l(self.gamma_left, o.gamma_left),
            beta_right: l(self.beta_right, o.beta_right),
            gamma_right: l(self.gamma_right, o.gamma_right),
        }
    }
}

/// Cartesian positions derived from a [`JointState`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KinematicFrame {
    pub hip: Point,
    pub torso_top: Point,
    pub com: Point,
    pub knee_left: Point,
    pub ankle_left: Point,
    pub knee_right: Point,
    pub ankle_right: Point,
}

impl KinematicFrame {
    pub fn mirror_about(&self, axis: f64) -> Self {
        Self {
            hip: self.hip.reflect(axis),
            torso_top: self.torso_top.reflect(axis),
            com: self.com.reflect(axis),
            knee_left: self.knee_right.reflect(axis),
            ankle_left: self.ankle_right.reflect(axis),
            knee_right: self.knee_left.reflect(axis),
            ankle_right: self.ankle_left.reflect(axis),
        }
    }
}

pub fn forward_kinematics(params: &BipedParams, q: &JointState) -> KinematicFrame {
    let knee_left = q.hip.along(q.beta_left, params.thigh);
    let knee_right = q.hip.along(q.beta_right, params.thigh);
    KinematicFrame {
        hip: q.hip,
        torso_top: Point::new(
            q.hip.x - params.torso * q.torso.sin(),
            q.hip.y + params.torso * q.torso.cos(),
        ),
        com: center_of_mass(params, q),
        knee_left,
        ankle_left: knee_left.along(q.gamma_left, params.shank),
        knee_right,
        ankle_right: knee_right.along(q.gamma_right, params.shank),
    }
}

/// Mass-weighted mean of the five link midpoints.
pub fn center_of_mass(params: &BipedParams, q: &JointState) -> Point {
    let h = q.hip;
    let torso_mid = Point::new(
        h.x - 0.5 * params.torso * q.torso.sin(),
        h.y + 0.5 * params.torso * q.torso.cos(),
    );
    let kl = h.along(q.beta_left, params.thigh);
    let kr = h.along(q.beta_right, params.thigh);
    let links = [
        (params.torso_mass, torso_mid),
        (params.thigh_mass, h.along(q.beta_left, 0.5 * params.thigh)),
        (params.thigh_mass, h.along(q.beta_right, 0.5 * params.thigh)),
        (
            params.shank_mass,
            kl.along(q.gamma_left, 0.5 * params.shank),
        ),
        (
            params.shank_mass,
            kr.along(q.gamma_right, 0.5 * params.shank),
        ),
    ];
    let total: f64 = links.iter().map(|(m, _)| m).sum();
    let (sx, sy) = links
        .iter()
        .fold((0.0, 0.0), |(sx, sy), (m, p)| (sx + m * p.x, sy + m * p.y));
    Point::new(sx / total, sy / total)
}

/// Thigh and shank angles placing the ankle at `ankle`, knee in front of the
/// hip-ankle line. `None` when the ankle is out of reach.
pub fn leg_ik(params: &BipedParams, hip: Point, ankle: Point) -> Option<(f64, f64)> {
    let (l1, l2) = (params.thigh, params.shank);
    let dx = ankle.x - hip.x;
    let dy = ankle.y - hip.y;
    let d = dx.hypot(dy);
    if d > l1 + l2 || d < (l1 - l2).abs() || d == 0.0 {
        return None;
    }
    let to_ankle = dx.atan2(-dy);
    let cos_hip = ((l1 * l1 + d * d - l2 * l2) / (2.0 * l1 * d)).clamp(-1.0, 1.0);
    let beta = to_ankle + cos_hip.acos();
    let knee = hip.along(beta, l1);
    let gamma = (ankle.x - knee.x).atan2(-(ankle.y - knee.y));
    Some((beta, gamma))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaitConfig {
    pub step_length: f64,
    pub period: f64,
    pub clearance: f64,
    /// Hip height; `None` means 0.75 of the leg length.
    pub hip_height: Option<f64>,
    pub frames: usize,
}

impl Default for GaitConfig {
    fn default() -> Self {
        Self {
            step_length: 0.3,
            period: 1.0,
            clearance: 0.05,
            hip_height: None,
            frames: 240,
        }
    }
}

impl GaitConfig {
    pub fn validate(&self, params: &BipedParams) -> Result<()> {
        let leg = params.leg_length();
        if !(self.step_length >= 0.0 && self.step_length < 2.0 * leg) {
            return Err(Error::InvalidConfig(format!(
                "step length must lie in [0, {}), got {}",
                2.0 * leg,
                self.step_length
            )));
        }
        if !(self.clearance > 0.0 && self.clearance.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "clearance must be positive, got {}",
                self.clearance
            )));
        }
        if !(self.period > 0.0 && self.period.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "period must be positive, got {}",
                self.period
            )));
        }
        if let Some(h) = self.hip_height {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "hip height must be positive, got {h}"
                )));
            }
        }
        if self.frames < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 frames, got {}",
                self.frames
            )));
        }
        Ok(())
    }

    pub fn hip_height_for(&self, params: &BipedParams) -> f64 {
        self.hip_height.unwrap_or(0.75 * params.leg_length())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaitFrame {
    pub phase: f64,
    pub state: JointState,
    pub kin: KinematicFrame,
}

impl GaitFrame {
    pub fn mirror_about(&self, axis: f64) -> Self {
        Self {
            phase: self.phase,
            state: self.state.mirror_about(axis),
            kin: self.kin.mirror_about(axis),
        }
    }

    /// Reflection about the frame's own hip vertical.
    pub fn mirror(&self) -> Self {
        self.mirror_about(self.state.hip.x)
    }
}

/// One walk cycle sampled at uniform phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaitCycle {
    pub params: BipedParams,
    pub config: GaitConfig,
    pub frames: Vec<GaitFrame>,
}

/// Cycloid progress: 0 -> 1 with zero velocity at both ends.
fn cycloid(t: f64) -> f64 {
    t - (2.0 * PI * t).sin() / (2.0 * PI)
}

fn lift(t: f64, clearance: f64) -> f64 {
    clearance * (1.0 - (2.0 * PI * t).cos()) / 2.0
}

/// Ankle targets over the cycle: during the first half the right foot
/// stands at `s/4` while the left swings from `-s/4` to `3s/4`; the second
/// half mirrors it. The hip moves forward at constant speed, `s` per cycle.
fn ankle_targets(cfg: &GaitConfig, phase: f64) -> (Point, Point) {
    let s = cfg.step_length;
    if phase < 0.5 {
        let t = 2.0 * phase;
        let left = Point::new(-0.25 * s + s * cycloid(t), lift(t, cfg.clearance));
        (left, Point::new(0.25 * s, 0.0))
    } else {
        let t = 2.0 * phase - 1.0;
        let right = Point::new(0.25 * s + s * cycloid(t), lift(t, cfg.clearance));
        (Point::new(0.75 * s, 0.0), right)
    }
}

/// Reference pose at `phase`; defined on the closed interval [0, 1] so the
/// end of the cycle can be compared with its start.
pub fn reference_pose(params: &BipedParams, cfg: &GaitConfig, phase: f64) -> Result<JointState> {
    let hip = Point::new(cfg.step_length * phase, cfg.hip_height_for(params));
    let (al, ar) = ankle_targets(cfg, phase);
    let solve = |ankle: Point| {
        leg_ik(params, hip, ankle).ok_or(Error::Unreachable {
            phase,
            distance: hip.dist(ankle),
            reach: params.leg_length(),
        })
    };
    let (beta_left, gamma_left) = solve(al)?;
    let (beta_right, gamma_right) = solve(ar)?;
    Ok(JointState {
        hip,
        torso: 0.0,
        beta_left,
        gamma_left,
        beta_right,
        gamma_right,
    })
}

/// Kinematic reference walk: stance foot pinned, swing foot on a cycloidal
/// arc, torso upright, joint angles from analytic leg IK.
pub fn generate_reference_gait(params: &BipedParams, cfg: &GaitConfig) -> Result<GaitCycle> {
    params.validate()?;
    cfg.validate(params)?;
    let frames = (0..cfg.frames)
        .map(|k| {
            let phase = k as f64 / cfg.frames as f64;
            let state = reference_pose(params, cfg, phase)?;
            Ok(GaitFrame {
                phase,
                state,
                kin: forward_kinematics(params, &state),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GaitCycle {
        params: *params,
        config: cfg.clone(),
        frames,
    })
}

impl GaitCycle {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn step_length(&self) -> f64 {
        self.config.step_length
    }

    /// Frame at fractional frame position `pos` (phase times frame count).
    ///
    /// Whole positions return the stored frame. Between frames the joint
    /// state is interpolated linearly and positions re-derived by forward
    /// kinematics. Positions wrap modulo one cycle; past the last stored
    /// frame the state blends towards the first frame advanced by one step.
    pub fn frame_at_position(&self, pos: f64) -> GaitFrame {
        let n = self.frames.len();
        let pos = pos.rem_euclid(n as f64);
        let i0 = (pos.floor() as usize).min(n - 1);
        let t = pos - i0 as f64;
        if t == 0.0 {
            return self.frames[i0];
        }
        let a = &self.frames[i0].state;
        let b = if i0 + 1 < n {
            self.frames[i0 + 1].state
        } else {
            let mut s = self.frames[0].state;
            s.hip.x += self.config.step_length;
            s
        };
        let state = a.lerp(&b, t);
        GaitFrame {
            phase: pos / n as f64,
            state,
            kin: forward_kinematics(&self.params, &state),
        }
    }

    pub fn frame_at_phase(&self, phase: f64) -> GaitFrame {
        self.frame_at_position(phase * self.frames.len() as f64)
    }

    /// The same walk reflected about `x = axis`.
    pub fn mirror_about(&self, axis: f64) -> GaitCycle {
        GaitCycle {
            params: self.params,
            config: self.config.clone(),
            frames: self.frames.iter().map(|f| f.mirror_about(axis)).collect(),
        }
    }

    pub const CSV_HEADER: &'static str =
        "phase,xh,yh,theta_t,beta_l,gamma_l,beta_r,gamma_r,x0,y0,xgl,ygl,xcl,ycl,xgr,ygr,xcr,ycr";

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.frames.len() * 400);
        out.push_str(Self::CSV_HEADER);
        out.push('\n');
        for f in &self.frames {
            let s = &f.state;
            let k = &f.kin;
            let fields = [
                f.phase,
                s.hip.x,
                s.hip.y,
                s.torso,
                s.beta_left,
                s.gamma_left,
                s.beta_right,
                s.gamma_right,
                k.com.x,
                k.com.y,
                k.knee_left.x,
                k.knee_left.y,
                k.ankle_left.x,
                k.ankle_left.y,
                k.knee_right.x,
                k.knee_right.y,
                k.ankle_right.x,
                k.ankle_right.y,
            ];
            let line: Vec<String> = fields.iter().map(|v| fmt_f64(*v)).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }

    /// Reads frames written by [`to_csv`](Self::to_csv). The torso top, which
    /// the CSV does not carry, is recomputed from `params`.
    pub fn frames_from_csv(text: &str, params: &BipedParams) -> Result<Vec<GaitFrame>> {
        read_csv(text, Self::CSV_HEADER)?
            .into_iter()
            .map(|fields| {
                let v = fields
                    .iter()
                    .map(|f| parse_f64(f))
                    .collect::<Result<Vec<f64>>>()?;
                let p = |i: usize| Point::new(v[i], v[i + 1]);
                let state = JointState {
                    hip: p(1),
                    torso: v[3],
                    beta_left: v[4],
                    gamma_left: v[5],
                    beta_right: v[6],
                    gamma_right: v[7],
                };
                let fk = forward_kinematics(params, &state);
                Ok(GaitFrame {
                    phase: v[0],
                    state,
                    kin: KinematicFrame {
                        hip: state.hip,
                        torso_top: fk.torso_top,
                        com: p(8),
                        knee_left: p(10),
                        ankle_left: p(12),
                        knee_right: p(14),
                        ankle_right: p(16),
                    },
                })
            })
            .collect()
    }
}
