//! State reconstruction from Rabi traces.
//!
//! Three routes:
//! * amplitude reconstruction ([`raqst`]): squared Bloch coordinates from the
//!   x/y trace amplitudes against an eigenstate reference, signs from the
//!   trace phases;
//! * phase reconstruction ([`rpqst`]): both angles from the two trace phases
//!   alone, no reference needed;
//! * the standard projective baseline ([`standard_qst`]) from the three
//!   rotated-readout populations.
//!
//! Phase conventions follow the trace synthesis (see [`crate::rabi`]): the
//! fitted x-trace phase is `atan2(-ny, nz)` and the y-trace phase is
//! `atan2(nx, nz)`. The helper angles used by the phase route are
//! `alpha = atan2(ny, nz)` (minus the x phase) and `beta = atan2(nx, nz)`
//! (the y phase). The amplitude route resolves its eight-fold sign ambiguity
//! through the exact identities `A_x cos(psi_x) = A_ref nz`,
//! `-A_x sin(psi_x) = A_ref ny` and `A_y sin(psi_y) = A_ref nx`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{fit_shared_frequency, fit_sine, FitOptions, SineFit};
use crate::gates::subspace_rotation;
use crate::rabi::TraceTriple;
use crate::scalar::{angle_distance, consistency_tol, wrap_pi, RealScalar};
use crate::spin::{
    angles_to_bloch, bloch_to_angles, bloch_to_density, fidelity, BlochVector, DensityMatrix,
    StateAngles,
};

/// Which reconstruction produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TomographyMethod {
    Raqst,
    Rpqst,
    Standard,
}

impl std::fmt::Display for TomographyMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TomographyMethod::Raqst => write!(f, "raqst"),
            TomographyMethod::Rpqst => write!(f, "rpqst"),
            TomographyMethod::Standard => write!(f, "standard"),
        }
    }
}

/// Reconstruction bookkeeping: resolved signs, helper angles, flags.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Diagnostics<T> {
    /// Signs resolved for `(nx, ny, nz)` by the amplitude route.
    pub signs: Option<[i8; 3]>,
    /// Phase-route helper angles, radians.
    pub alpha: Option<T>,
    pub beta: Option<T>,
    /// A squared coordinate was clamped into range.
    pub clamped: bool,
    /// The standard route saw a Bloch vector well inside the sphere.
    pub non_pure: bool,
    /// The polar angle landed on a pole, leaving phi undefined.
    pub phi_undefined: bool,
    pub notes: Vec<String>,
}

/// A reconstructed state.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: RealScalar")]
pub struct TomographyResult<T> {
    pub method: TomographyMethod,
    pub bloch: BlochVector<T>,
    #[serde(with = "angles_deg_rad")]
    pub angles: StateAngles<T>,
    pub rho: DensityMatrix<T>,
    pub fidelity_vs_target: Option<T>,
    pub diagnostics: Diagnostics<T>,
}

/// Serializes state angles with both unit systems:
/// `{"theta_rad":…,"phi_rad":…,"theta_deg":…,"phi_deg":…}`.
mod angles_deg_rad {
    use super::{RealScalar, StateAngles};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Repr<T> {
        theta_rad: T,
        phi_rad: T,
        theta_deg: T,
        phi_deg: T,
    }

    pub fn serialize<T: RealScalar, S: Serializer>(
        angles: &StateAngles<T>,
        serializer: S,
    ) -> Result<S::Ok, S::Error> {
        Repr {
            theta_rad: angles.theta,
            phi_rad: angles.phi,
            theta_deg: angles.theta_degrees(),
            phi_deg: angles.phi_degrees(),
        }
        .serialize(serializer)
    }

    pub fn deserialize<'de, T: RealScalar, D: Deserializer<'de>>(
        deserializer: D,
    ) -> Result<StateAngles<T>, D::Error> {
        let repr = Repr::<T>::deserialize(deserializer)?;
        StateAngles::new(repr.theta_rad, repr.phi_rad).map_err(serde::de::Error::custom)
    }
}

impl<T: RealScalar> TomographyResult<T> {
    fn from_bloch(
        method: TomographyMethod,
        bloch: BlochVector<T>,
        mut diagnostics: Diagnostics<T>,
    ) -> Result<Self> {
        let unit = bloch.normalized()?;
        let (angles, phi_undefined) = bloch_to_angles(&unit)?;
        diagnostics.phi_undefined = phi_undefined;
        let rho = bloch_to_density(&angles_to_bloch(angles))?;
        Ok(Self {
            method,
            bloch: unit,
            angles,
            rho,
            fidelity_vs_target: None,
            diagnostics,
        })
    }
}

/// How out-of-range squared coordinates are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClampPolicy {
    /// Negative squares within the consistency window are zeroed; anything
    /// worse is an error.
    Strict,
    /// Every square is clamped into `[0, 1]` and the result flagged; used by
    /// perturbation sweeps and as a noisy-data fallback.
    Lenient,
}

fn sign_of<T: RealScalar>(x: T) -> i8 {
    if x < T::zero() {
        -1
    } else {
        1
    }
}

/// Amplitude reconstruction from exact parts: amplitude ratios
/// `ax = A_x / A_ref`, `ay = A_y / A_ref` and the two trace phases.
pub fn raqst_from_parts<T: RealScalar>(
    ax: T,
    ay: T,
    psi_x: T,
    psi_y: T,
    policy: ClampPolicy,
) -> Result<(BlochVector<T>, Diagnostics<T>)> {
    let one = T::one();
    let nz2 = ax * ax + ay * ay - one;
    let ny2 = ax * ax - nz2;
    let nx2 = ay * ay - nz2;

    let window = consistency_tol::<T>();
    let mut clamped = false;
    let mut clamp = |v: T, label: &str, notes: &mut Vec<String>| -> Result<T> {
        if v < T::zero() {
            match policy {
                ClampPolicy::Strict if v < -window => {
                    return Err(Error::InconsistentAmplitudes(format!(
                        "{label} = {v} below the clamping window; amplitude ratios are inconsistent (drift or misfit?)"
                    )));
                }
                _ => {
                    if v < -window {
                        clamped = true;
                        notes.push(format!("{label} clamped from {v}"));
                    }
                    return Ok(T::zero());
                }
            }
        }
        if v > one {
            match policy {
                ClampPolicy::Strict if v > one + window => {
                    return Err(Error::InconsistentAmplitudes(format!(
                        "{label} = {v} exceeds 1 beyond the clamping window"
                    )));
                }
                _ => {
                    if v > one + window {
                        clamped = true;
                        notes.push(format!("{label} clamped from {v}"));
                    }
                    return Ok(one);
                }
            }
        }
        Ok(v)
    };

    let mut notes = Vec::new();
    let nz2 = clamp(nz2, "nz^2", &mut notes)?;
    let ny2 = clamp(ny2, "ny^2", &mut notes)?;
    let nx2 = clamp(nx2, "nx^2", &mut notes)?;

    // signs from the phases; a sign attached to a zero magnitude is inert
    let sx = sign_of(psi_y.sin());
    let sy = sign_of(-psi_x.sin());
    let sz = sign_of(ax * psi_x.cos() + ay * psi_y.cos());

    let v = BlochVector::new(
        T::from_f(sx as f64) * nx2.sqrt(),
        T::from_f(sy as f64) * ny2.sqrt(),
        T::from_f(sz as f64) * nz2.sqrt(),
    );
    let diagnostics = Diagnostics {
        signs: Some([sx, sy, sz]),
        clamped,
        notes,
        ..Diagnostics::default()
    };
    Ok((v.normalized()?, diagnostics))
}

fn check_shared_frequency<T: RealScalar>(fits: &[&SineFit<T>]) -> Result<()> {
    let mean: T = fits.iter().map(|f| f.frequency).sum::<T>() / T::from_f(fits.len() as f64);
    for f in fits {
        if (f.frequency - mean).abs() > mean * T::from_f(0.01) {
            return Err(Error::InconsistentAmplitudes(format!(
                "trace frequencies disagree beyond 1%: {} vs mean {mean}",
                f.frequency
            )));
        }
    }
    Ok(())
}

/// Amplitude reconstruction from the fitted x, y and reference traces.
pub fn raqst<T: RealScalar>(
    fit_x: &SineFit<T>,
    fit_y: &SineFit<T>,
    fit_ref: &SineFit<T>,
) -> Result<TomographyResult<T>> {
    check_shared_frequency(&[fit_x, fit_y, fit_ref])?;
    let floor = T::from_f(1e-9) * fit_ref.offset.abs().max(T::one());
    if fit_ref.amplitude < floor || fit_ref.phase_undefined {
        return Err(Error::InconsistentAmplitudes(
            "reference amplitude is zero; cannot normalize the Bloch sphere".into(),
        ));
    }
    let (v, d) = raqst_from_parts(
        fit_x.amplitude / fit_ref.amplitude,
        fit_y.amplitude / fit_ref.amplitude,
        fit_x.phase,
        fit_y.phase,
        ClampPolicy::Strict,
    )?;
    TomographyResult::from_bloch(TomographyMethod::Raqst, v, d)
}

/// Strict amplitude reconstruction with a lenient fallback: when noisy data
/// trips the strict consistency window, reconstructs with clamping instead.
/// The second return value reports whether the fallback fired.
pub fn raqst_with_fallback<T: RealScalar>(
    fit_x: &SineFit<T>,
    fit_y: &SineFit<T>,
    fit_ref: &SineFit<T>,
) -> Result<(TomographyResult<T>, bool)> {
    match raqst(fit_x, fit_y, fit_ref) {
        Ok(res) => Ok((res, false)),
        Err(Error::InconsistentAmplitudes(_)) => {
            let (v, d) = raqst_from_parts(
                fit_x.amplitude / fit_ref.amplitude,
                fit_y.amplitude / fit_ref.amplitude,
                fit_x.phase,
                fit_y.phase,
                ClampPolicy::Lenient,
            )?;
            Ok((TomographyResult::from_bloch(TomographyMethod::Raqst, v, d)?, true))
        }
        Err(e) => Err(e),
    }
}

/// Phase reconstruction from helper angles `alpha = atan2(ny, nz)` and
/// `beta = atan2(nx, nz)`.
///
/// Quadrant-aware evaluation: with `a = tan(alpha)`, `b = tan(beta)` and the
/// hemisphere sign `s` read off the better-conditioned cosine,
/// `nz = s / sqrt(1 + a^2 + b^2)`, `ny = a nz`, `nx = b nz`. This stays
/// finite arbitrarily close to the equator.
pub fn rpqst_from_phases<T: RealScalar>(alpha: T, beta: T) -> Result<(BlochVector<T>, Diagnostics<T>)> {
    let a = alpha.tan();
    let b = beta.tan();
    let (ca, cb) = (alpha.cos(), beta.cos());
    let s = if ca.abs() >= cb.abs() {
        sign_of(ca)
    } else {
        sign_of(cb)
    };
    let nz = T::from_f(s as f64) / (T::one() + a * a + b * b).sqrt();
    let v = BlochVector::new(b * nz, a * nz, nz);
    let diagnostics = Diagnostics {
        alpha: Some(alpha),
        beta: Some(beta),
        ..Diagnostics::default()
    };
    Ok((v.normalized()?, diagnostics))
}

/// Phase reconstruction from the fitted x and y traces. Needs no reference.
pub fn rpqst<T: RealScalar>(fit_x: &SineFit<T>, fit_y: &SineFit<T>) -> Result<TomographyResult<T>> {
    check_shared_frequency(&[fit_x, fit_y])?;
    for (fit, drive, frozen) in [(fit_x, "x", "ny, nz"), (fit_y, "y", "nx, nz")] {
        let floor = T::from_f(1e-6) * fit.offset.abs();
        if fit.phase_undefined || fit.amplitude < floor {
            return Err(Error::AmbiguousState(format!(
                "{drive}-drive trace is flat (state on the {drive} rotation axis): its phase is undefined, so {frozen} cannot be resolved"
            )));
        }
    }
    let alpha = wrap_pi(-fit_x.phase);
    let beta = wrap_pi(fit_y.phase);
    let (v, d) = rpqst_from_phases(alpha, beta)?;
    TomographyResult::from_bloch(TomographyMethod::Rpqst, v, d)
}

/// Standard projective baseline. `p_z` is the bare `|0>` population, `p_x`
/// the population after the 90-degree x rotation, `p_y` after the 90-degree
/// y rotation; under the crate's rotation convention these read out
/// `nz = 2 p_z - 1`, `ny = 2 p_x - 1` and `nx = 1 - 2 p_y`.
pub fn standard_qst<T: RealScalar>(p_z: T, p_x: T, p_y: T) -> Result<TomographyResult<T>> {
    let window = consistency_tol::<T>();
    for (p, label) in [(p_z, "p_z"), (p_x, "p_x"), (p_y, "p_y")] {
        if p < -window || p > T::one() + window {
            return Err(Error::Domain(format!("population {label} = {p} outside [0, 1]")));
        }
    }
    let two = T::from_f(2.0);
    let raw = BlochVector::new(
        T::one() - two * p_y,
        two * p_x - T::one(),
        two * p_z - T::one(),
    );
    let mut diagnostics = Diagnostics::default();
    let norm = raw.norm();
    if (norm - T::one()).abs() <= T::from_f(1e-2) {
        return TomographyResult::from_bloch(TomographyMethod::Standard, raw, diagnostics);
    }
    // keep the raw vector: the data describe a mixed or inconsistent state
    diagnostics.non_pure = true;
    diagnostics
        .notes
        .push(format!("Bloch norm {norm} is not close to 1; vector left unnormalized"));
    let direction = if norm > T::zero() {
        raw.normalized()?
    } else {
        BlochVector::new(T::zero(), T::zero(), T::one())
    };
    let (angles, phi_undefined) = bloch_to_angles(&direction)?;
    diagnostics.phi_undefined = phi_undefined;
    Ok(TomographyResult {
        method: TomographyMethod::Standard,
        bloch: raw,
        angles,
        rho: bloch_to_density(&angles_to_bloch(angles))?,
        fidelity_vs_target: None,
        diagnostics,
    })
}

/// Rotated-readout populations `(p_z, p_x, p_y)` of a qubit state, computed
/// by applying the same 90-degree rotations the standard route inverts.
pub fn qubit_populations<T: RealScalar>(state: &DensityMatrix<T>) -> Result<(T, T, T)> {
    if state.dim() != 2 {
        return Err(Error::DimensionMismatch("populations need a 2-dim state".into()));
    }
    let p_z = state.population(0);
    let x90 = subspace_rotation::<T>(2, 0, 1, T::zero(), T::FRAC_PI_2())?;
    let y90 = subspace_rotation::<T>(2, 0, 1, T::FRAC_PI_2(), T::FRAC_PI_2())?;
    let p_x = x90.unitary_matrix()?.sandwich(state.matrix())?[(0, 0)].re;
    let p_y = y90.unitary_matrix()?.sandwich(state.matrix())?[(0, 0)].re;
    Ok((p_z, p_x, p_y))
}

/// Fitted (x, y, reference) triple.
pub struct FitTriple<T> {
    pub x: SineFit<T>,
    pub y: SineFit<T>,
    pub reference: SineFit<T>,
}

/// Fits a trace triple; by default the frequency is estimated jointly so all
/// three fits share one value.
pub fn fit_triple<T: RealScalar>(triple: &TraceTriple<T>, shared_frequency: bool) -> Result<FitTriple<T>> {
    if shared_frequency {
        let series = [
            (&triple.x.times_us[..], &triple.x.signal[..]),
            (&triple.y.times_us[..], &triple.y.signal[..]),
            (&triple.reference.times_us[..], &triple.reference.signal[..]),
        ];
        let mut fits = fit_shared_frequency(&series, None)?;
        let reference = fits.pop().expect("three fits");
        let y = fits.pop().expect("three fits");
        let x = fits.pop().expect("three fits");
        Ok(FitTriple { x, y, reference })
    } else {
        let opts = FitOptions::default();
        Ok(FitTriple {
            x: fit_sine(&triple.x, &opts)?,
            y: fit_sine(&triple.y, &opts)?,
            reference: fit_sine(&triple.reference, &opts)?,
        })
    }
}

/// Comparison of a reconstruction against a target preparation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: RealScalar")]
pub struct Report<T> {
    #[serde(with = "angles_deg_rad")]
    pub target_angles: StateAngles<T>,
    pub target_rho: DensityMatrix<T>,
    pub result: TomographyResult<T>,
    pub fidelity: T,
    /// Polar angle error, radians.
    pub delta_theta: T,
    /// Azimuth error, shortest arc, radians.
    pub delta_phi: T,
    /// Plot-ready bar data for the real and imaginary parts of both density
    /// matrices.
    pub bars: BarData<T>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BarData<T> {
    pub re: Vec<Vec<T>>,
    pub im: Vec<Vec<T>>,
    pub target_re: Vec<Vec<T>>,
    pub target_im: Vec<Vec<T>>,
}

/// Builds the comparison report; also fills `fidelity_vs_target` on the
/// embedded result.
pub fn reconstruct_report<T: RealScalar>(
    result: &TomographyResult<T>,
    target: StateAngles<T>,
) -> Result<Report<T>> {
    let target_rho = bloch_to_density(&angles_to_bloch(target))?;
    let f = fidelity(&target_rho, &result.rho)?;
    let mut result = result.clone();
    result.fidelity_vs_target = Some(f);
    Ok(Report {
        target_angles: target,
        delta_theta: (result.angles.theta - target.theta).abs(),
        delta_phi: angle_distance(result.angles.phi, target.phi),
        bars: BarData {
            re: result.rho.matrix().re_rows(),
            im: result.rho.matrix().im_rows(),
            target_re: target_rho.matrix().re_rows(),
            target_im: target_rho.matrix().im_rows(),
        },
        fidelity: f,
        target_rho,
        result,
    })
}

/// Exact trace parameters of an ideal state under the crate's conventions:
/// amplitude ratios against the reference and the two fitted phases, plus
/// the phase-route helper angles.
#[derive(Debug, Clone, Copy)]
pub struct IdealTraceParts<T> {
    pub ratio_x: T,
    pub ratio_y: T,
    pub psi_x: T,
    pub psi_y: T,
    pub alpha: T,
    pub beta: T,
}

pub fn ideal_trace_parts<T: RealScalar>(n: &BlochVector<T>) -> IdealTraceParts<T> {
    IdealTraceParts {
        ratio_x: (n.ny * n.ny + n.nz * n.nz).sqrt(),
        ratio_y: (n.nx * n.nx + n.nz * n.nz).sqrt(),
        psi_x: (-n.ny).atan2(n.nz),
        psi_y: n.nx.atan2(n.nz),
        alpha: n.ny.atan2(n.nz),
        beta: n.nx.atan2(n.nz),
    }
}

/// Single-branch arctangent forms of the phase-route angle recovery.
///
/// Production code uses the quadrant-aware reconstruction in
/// [`rpqst_from_phases`]; these closed forms are kept to document their
/// domains of validity. `theta_from_beta` matches the production path
/// wherever it is defined; `theta_from_alpha` uses the x-trace angle in the
/// same slot and is *not* self-consistent (see the unit tests).
pub mod single_branch {
    use super::RealScalar;

    /// `sign(cos b)[ |atan(tan b / cos phi)| - pi/2 ] + pi/2`.
    pub fn theta_from_beta<T: RealScalar>(beta: T, phi: T) -> T {
        let half_pi = T::FRAC_PI_2();
        beta.cos().signum() * ((beta.tan() / phi.cos()).atan().abs() - half_pi) + half_pi
    }

    /// Same form with `alpha` in place of `beta`; inconsistent with
    /// [`super::rpqst_from_phases`] except on symmetry lines.
    pub fn theta_from_alpha<T: RealScalar>(alpha: T, phi: T) -> T {
        theta_from_beta(alpha, phi)
    }

    /// `pi - atan(tan b / tan a) - sign(sin a) pi/2`.
    pub fn phi_from_phases<T: RealScalar>(alpha: T, beta: T) -> T {
        T::PI() - (beta.tan() / alpha.tan()).atan() - alpha.sin().signum() * T::FRAC_PI_2()
    }
}
