//! Fitting the decay coefficients from observed marker displacements.

use super::motion::{capped_shear, twist_matrix, MotionCoefficients, Vec2};
use crate::error::{Error, Result};
use crate::scene::ContactState;

pub const MIN_OBSERVATIONS: usize = 5;
const LOG_LAMBDA_MIN: f64 = -18.0;
const LOG_LAMBDA_MAX: f64 = 7.0;
const MAX_ITERATIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadKind {
    Dilate,
    Shear,
    Twist,
}

impl LoadKind {
    pub fn name(&self) -> &'static str {
        match self {
            LoadKind::Dilate => "dilate",
            LoadKind::Shear => "shear",
            LoadKind::Twist => "twist",
        }
    }
}

/// Markers before and after one load. Shear and twist observations must
/// already have the dilate displacement of the press subtracted.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionObservation {
    pub load: LoadKind,
    pub contact: ContactState,
    pub initial: Vec<Vec2>,
    pub observed: Vec<Vec2>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaFit {
    pub lambda: f64,
    pub rms: f64,
    pub iterations: usize,
    /// Cost after every accepted step, starting with the initial cost.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub coefficients: MotionCoefficients,
    pub dilate: Option<LambdaFit>,
    pub shear: Option<LambdaFit>,
    pub twist: Option<LambdaFit>,
}

impl FitReport {
    pub fn to_text(&self) -> String {
        let mut s = String::from("marker calibration\n");
        for (name, fit) in [("dilate", &self.dilate), ("shear", &self.shear), ("twist", &self.twist)] {
            match fit {
                Some(f) => s.push_str(&format!(
                    "{name}: lambda={:.6e} rms={:.6e} mm iterations={}\n",
                    f.lambda, f.rms, f.iterations
                )),
                None => s.push_str(&format!("{name}: not fitted\n")),
            }
        }
        s
    }
}

/// Basis terms `(a_j, ρ_j²)` such that the predicted displacement is
/// `Σ_j a_j · exp(−λ ρ_j²)` for each marker.
struct Terms {
    markers: Vec<(Vec<(Vec2, f64)>, Vec2)>,
}

fn terms_for(obs: &MotionObservation, coeffs: &MotionCoefficients) -> Result<Terms> {
    if obs.initial.len() != obs.observed.len() {
        return Err(Error::LengthMismatch { left: obs.initial.len(), right: obs.observed.len() });
    }
    let c = &obs.contact;
    let markers = obs
        .initial
        .iter()
        .zip(&obs.observed)
        .map(|(m, o)| {
            let target = (o.0 - m.0, o.1 - m.1);
            let basis = match obs.load {
                LoadKind::Dilate => c
                    .points
                    .iter()
                    .map(|p| {
                        let (rx, ry) = (m.0 - p.position.0, m.1 - p.position.1);
                        let w = p.dh * p.area;
                        ((w * rx, w * ry), rx * rx + ry * ry)
                    })
                    .collect(),
                LoadKind::Shear => {
                    let s = capped_shear(c.shear, coeffs.shear_max);
                    let (rx, ry) = (m.0 - c.origin.0, m.1 - c.origin.1);
                    vec![(s, rx * rx + ry * ry)]
                }
                LoadKind::Twist => {
                    let t = twist_matrix(c.twist_deg, coeffs.twist_max_deg);
                    let (rx, ry) = (m.0 - c.origin.0, m.1 - c.origin.1);
                    vec![((t[0][0] * rx + t[0][1] * ry, t[1][0] * rx + t[1][1] * ry), rx * rx + ry * ry)]
                }
            };
            (basis, target)
        })
        .collect();
    Ok(Terms { markers })
}

/// Sum of squared residuals and its derivative with respect to `u = ln λ`.
fn cost_and_slope(terms: &[Terms], u: f64) -> (f64, f64, f64) {
    let lambda = u.exp();
    let (mut cost, mut g, mut h) = (0.0, 0.0, 0.0);
    for t in terms {
        for (basis, target) in &t.markers {
            let (mut px, mut py, mut jx, mut jy) = (0.0, 0.0, 0.0, 0.0);
            for (a, r2) in basis {
                let e = (-lambda * r2).exp();
                px += a.0 * e;
                py += a.1 * e;
                // d/du of exp(-e^u r2) = -λ r2 exp(-λ r2)
                jx -= a.0 * e * lambda * r2;
                jy -= a.1 * e * lambda * r2;
            }
            let (rx, ry) = (px - target.0, py - target.1);
            cost += rx * rx + ry * ry;
            g += jx * rx + jy * ry;
            h += jx * jx + jy * jy;
        }
    }
    (cost, g, h)
}

fn fit_one(what: LoadKind, terms: &[Terms], init: f64) -> Result<LambdaFit> {
    let samples: usize = terms.iter().map(|t| t.markers.len()).sum();
    // coarse scan guards against starting in a flat region
    let mut u = if init > 0.0 { init.ln().clamp(LOG_LAMBDA_MIN, LOG_LAMBDA_MAX) } else { 0.0 };
    let mut cost = cost_and_slope(terms, u).0;
    let mut k = LOG_LAMBDA_MIN;
    while k <= LOG_LAMBDA_MAX {
        let c = cost_and_slope(terms, k).0;
        if c < cost {
            cost = c;
            u = k;
        }
        k += 0.25;
    }
    let degenerate = |reason: &str| Error::DegenerateFit {
        what: format!("lambda_{}", &what.name()[..1]),
        reason: reason.to_string(),
    };
    let mut trace = vec![cost];
    let mut mu = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let (c0, g, h) = cost_and_slope(terms, u);
        if h <= 0.0 || !h.is_finite() {
            if u >= LOG_LAMBDA_MAX - 1e-9 {
                return Err(degenerate("lambda driven to its upper bound; observations carry no decay"));
            }
            return Err(degenerate("predictions do not depend on lambda"));
        }
        if g.abs() <= 1e-14 * (c0 + 1e-300).max(1e-300) || g == 0.0 {
            converged = true;
            break;
        }
        let mut accepted = false;
        for _ in 0..40 {
            let step = -g / (h * (1.0 + mu));
            let cand = (u + step).clamp(LOG_LAMBDA_MIN, LOG_LAMBDA_MAX);
            let c1 = cost_and_slope(terms, cand).0;
            if c1 <= c0 {
                let done = (cand - u).abs() < 1e-12 || (c0 - c1) <= 1e-15 * c0;
                u = cand;
                cost = c1;
                trace.push(c1);
                mu = (mu / 3.0).max(1e-12);
                accepted = true;
                if done {
                    converged = true;
                }
                break;
            }
            mu *= 4.0;
        }
        if !accepted || converged {
            converged = true;
            break;
        }
    }
    if u >= LOG_LAMBDA_MAX - 1e-9 {
        return Err(degenerate("lambda driven to its upper bound; observations carry no decay"));
    }
    if !converged {
        return Err(Error::NonConvergence { iterations, best: u.exp(), best_cost: cost, trace });
    }
    Ok(LambdaFit { lambda: u.exp(), rms: (cost / samples.max(1) as f64).sqrt(), iterations, trace })
}

/// Fits `λ_d`, `λ_s` and `λ_t` independently. A load kind without
/// observations keeps its value from `init`.
pub fn fit_lambdas(observations: &[MotionObservation], init: &MotionCoefficients) -> Result<FitReport> {
    init.validate()?;
    let mut coefficients = *init;
    let mut fits = [None, None, None];
    for (slot, kind) in [LoadKind::Dilate, LoadKind::Shear, LoadKind::Twist].into_iter().enumerate() {
        let terms =
            observations.iter().filter(|o| o.load == kind).map(|o| terms_for(o, init)).collect::<Result<Vec<_>>>()?;
        if terms.is_empty() {
            continue;
        }
        if terms.len() < MIN_OBSERVATIONS {
            return Err(Error::InsufficientData(format!(
                "{} fit needs at least {MIN_OBSERVATIONS} observations, got {}",
                kind.name(),
                terms.len()
            )));
        }
        let start = match kind {
            LoadKind::Dilate => init.lambda_d,
            LoadKind::Shear => init.lambda_s,
            LoadKind::Twist => init.lambda_t,
        };
        let fit = fit_one(kind, &terms, start)?;
        match kind {
            LoadKind::Dilate => coefficients.lambda_d = fit.lambda,
            LoadKind::Shear => coefficients.lambda_s = fit.lambda,
            LoadKind::Twist => coefficients.lambda_t = fit.lambda,
        }
        fits[slot] = Some(fit);
    }
    let [dilate, shear, twist] = fits;
    Ok(FitReport { coefficients, dilate, shear, twist })
}
