//! Error-sensitivity sweeps, Monte-Carlo fidelity statistics, and the
//! octant demonstration suite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rabi::{simulate_triple, RabiConfig, TracePath};
use crate::scalar::RealScalar;
use crate::spin::{angles_to_bloch, bloch_to_density, fidelity, StateAngles};
use crate::tomo::{
    fit_triple, ideal_trace_parts, raqst_from_parts, raqst_with_fallback, rpqst,
    rpqst_from_phases, ClampPolicy, TomographyMethod, TomographyResult,
};

/// Which exactly-computed quantity a sweep perturbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbedQuantity {
    /// The x-trace amplitude ratio (amplitude route input).
    AmplitudeX,
    /// The x-trace helper phase angle (phase route input).
    PhaseAlpha,
}

/// How the two perturbation signs are reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationMode {
    /// One curve: the worse fidelity of the two signs at each grid point.
    WorstCaseSign,
    /// Two curves, one per sign.
    BothSigns,
}

/// Sweep description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSpec<T> {
    pub method: TomographyMethod,
    pub quantity: PerturbedQuantity,
    /// Relative perturbation, e.g. 0.01 for 1%.
    pub relative_error: T,
    /// Polar angle grid, degrees, inside (0, 180).
    pub theta_grid_deg: Vec<T>,
    /// Fixed azimuth, degrees.
    pub phi_deg: T,
    pub mode: PerturbationMode,
}

impl<T: RealScalar> SweepSpec<T> {
    /// 5..175 degrees in steps of 5, azimuth 45 degrees, worst-case sign.
    pub fn standard(method: TomographyMethod, quantity: PerturbedQuantity, eps: T) -> Self {
        Self {
            method,
            quantity,
            relative_error: eps,
            theta_grid_deg: default_theta_grid(),
            phi_deg: T::from_f(45.0),
            mode: PerturbationMode::WorstCaseSign,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.relative_error < T::zero() {
            return Err(Error::InvalidConfig("relative error must be non-negative".into()));
        }
        if self.theta_grid_deg.is_empty() {
            return Err(Error::InvalidConfig("empty theta grid".into()));
        }
        for &t in &self.theta_grid_deg {
            if t <= T::zero() || t >= T::from_f(180.0) {
                return Err(Error::InvalidConfig(format!(
                    "theta grid value {t} outside (0, 180)"
                )));
            }
        }
        match self.method {
            TomographyMethod::Raqst | TomographyMethod::Rpqst => Ok(()),
            TomographyMethod::Standard => Err(Error::InvalidConfig(
                "sweeps cover the amplitude and phase routes only".into(),
            )),
        }
    }
}

pub fn default_theta_grid<T: RealScalar>() -> Vec<T> {
    (1..36).map(|k| T::from_f(5.0 * k as f64)).collect()
}

/// One grid point of a sweep: fidelities for the `+eps` and `-eps` signs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint<T> {
    pub theta_deg: T,
    pub fidelity_plus: T,
    pub fidelity_minus: T,
    /// A reconstruction had to clamp out-of-range squared coordinates.
    pub clamped: bool,
}

impl<T: RealScalar> SweepPoint<T> {
    pub fn worst(&self) -> T {
        self.fidelity_plus.min(self.fidelity_minus)
    }

    pub fn mean(&self) -> T {
        (self.fidelity_plus + self.fidelity_minus) / T::from_f(2.0)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult<T> {
    pub spec: SweepSpec<T>,
    pub points: Vec<SweepPoint<T>>,
}

/// Computes the exact trace parameters of the ideal state at each grid
/// angle, perturbs the selected quantity by `(1 +/- eps)`, reruns the
/// selected reconstruction, and records the fidelity against the ideal
/// state. Inconsistent perturbed amplitudes are clamped and flagged rather
/// than treated as errors.
pub fn error_sweep<T: RealScalar>(spec: &SweepSpec<T>) -> Result<SweepResult<T>> {
    spec.validate()?;
    let eps = spec.relative_error;
    let mut points = Vec::with_capacity(spec.theta_grid_deg.len());
    for &theta_deg in &spec.theta_grid_deg {
        let angles = StateAngles::from_degrees(theta_deg, spec.phi_deg)?;
        let ideal = angles_to_bloch(angles);
        let ideal_rho = bloch_to_density(&ideal)?;
        let parts = ideal_trace_parts(&ideal);

        let mut clamped = false;
        let mut run_sign = |sign: T| -> Result<T> {
            let factor = T::one() + sign * eps;
            let (v, d) = match (spec.method, spec.quantity) {
                (TomographyMethod::Raqst, PerturbedQuantity::AmplitudeX) => raqst_from_parts(
                    parts.ratio_x * factor,
                    parts.ratio_y,
                    parts.psi_x,
                    parts.psi_y,
                    ClampPolicy::Lenient,
                )?,
                (TomographyMethod::Rpqst, PerturbedQuantity::PhaseAlpha) => {
                    rpqst_from_phases(parts.alpha * factor, parts.beta)?
                }
                (TomographyMethod::Raqst, PerturbedQuantity::PhaseAlpha) => {
                    // phase perturbation only moves the resolved signs; feed
                    // the perturbed phase into the sign resolution
                    raqst_from_parts(
                        parts.ratio_x,
                        parts.ratio_y,
                        -(parts.alpha * factor),
                        parts.psi_y,
                        ClampPolicy::Lenient,
                    )?
                }
                (TomographyMethod::Rpqst, PerturbedQuantity::AmplitudeX) => {
                    // amplitudes do not enter the phase route
                    rpqst_from_phases(parts.alpha, parts.beta)?
                }
                (TomographyMethod::Standard, _) => unreachable!("validated"),
            };
            clamped |= d.clamped;
            fidelity(&ideal_rho, &bloch_to_density(&v)?)
        };

        let fidelity_plus = run_sign(T::one())?;
        let fidelity_minus = run_sign(-T::one())?;
        points.push(SweepPoint {
            theta_deg,
            fidelity_plus,
            fidelity_minus,
            clamped,
        });
    }
    Ok(SweepResult {
        spec: spec.clone(),
        points,
    })
}

/// Monte-Carlo configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McConfig<T> {
    pub n_states: usize,
    /// Noise standard deviation as a fraction of the contrast.
    pub noise_sigma_rel: T,
    /// Cumulative per-trace contrast loss across the session (0 disables).
    pub session_drift: T,
    pub seed: u64,
    pub methods: Vec<TomographyMethod>,
    pub base: RabiConfig<T>,
    pub path: TracePath,
}

impl<T: RealScalar> McConfig<T> {
    pub fn new(n_states: usize, noise_sigma_rel: T, seed: u64) -> Self {
        Self {
            n_states,
            noise_sigma_rel,
            session_drift: T::zero(),
            seed,
            methods: vec![TomographyMethod::Raqst, TomographyMethod::Rpqst],
            base: RabiConfig::default_config(),
            path: TracePath::Electron,
        }
    }
}

/// One sampled state's reconstruction fidelities.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McRecord<T> {
    pub index: usize,
    pub theta_deg: T,
    pub phi_deg: T,
    pub fidelities: Vec<(TomographyMethod, T)>,
    /// Methods that needed the lenient clamped reconstruction.
    pub flagged: Vec<TomographyMethod>,
}

/// Aggregate fidelity statistics for one method.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McStats<T> {
    pub method: TomographyMethod,
    pub mean: T,
    pub median: T,
    pub min: T,
    pub max: T,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McResult<T> {
    pub records: Vec<McRecord<T>>,
    pub stats: Vec<McStats<T>>,
}

/// Samples uniform pure states (uniform `cos theta`, uniform `phi`),
/// synthesizes a noisy trace triple per state, reconstructs with each
/// requested method and reports per-method statistics. Deterministic for a
/// fixed seed; per-state substreams keep parallel and serial evaluation
/// identical.
///
/// When the strict amplitude route rejects noisy data as inconsistent, the
/// record falls back to the lenient clamped reconstruction and the method is
/// flagged on that record.
pub fn monte_carlo_fidelity<T: RealScalar>(cfg: &McConfig<T>) -> Result<McResult<T>> {
    if cfg.n_states == 0 {
        return Err(Error::InvalidConfig("need at least one state".into()));
    }
    cfg.base.validate()?;
    let mut records = Vec::with_capacity(cfg.n_states);
    for index in 0..cfg.n_states {
        // state sampling stream: 8 substreams reserved per state
        let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
        rng.set_stream(index as u64 * 8);
        let cos_theta: f64 = rng.gen_range(-1.0..=1.0);
        let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let angles = StateAngles::new(T::from_f(cos_theta.acos()), T::from_f(phi))?;
        let prepared = bloch_to_density(&angles_to_bloch(angles))?;

        let mut base = cfg.base.clone();
        base.seed = cfg.seed;
        base.stream = index as u64 * 8 + 1;
        base.noise_sigma = cfg.noise_sigma_rel * base.contrast;
        let triple = simulate_triple(angles, &base, cfg.path, cfg.session_drift)?;
        let fits = fit_triple(&triple, true)?;

        let mut fidelities = Vec::new();
        let mut flagged = Vec::new();
        for &method in &cfg.methods {
            let outcome: Result<TomographyResult<T>> = match method {
                TomographyMethod::Raqst => {
                    raqst_with_fallback(&fits.x, &fits.y, &fits.reference).map(|(res, fell_back)| {
                        if fell_back {
                            flagged.push(method);
                        }
                        res
                    })
                }
                TomographyMethod::Rpqst => rpqst(&fits.x, &fits.y),
                TomographyMethod::Standard => {
                    let (pz, px, py) = crate::tomo::qubit_populations(&prepared)?;
                    crate::tomo::standard_qst(pz, px, py)
                }
            };
            let f = match outcome {
                Ok(res) => fidelity(&prepared, &res.rho)?,
                Err(Error::AmbiguousState(_)) => {
                    // a state exactly on a drive axis with no usable phase
                    flagged.push(method);
                    T::zero()
                }
                Err(e) => return Err(e),
            };
            fidelities.push((method, f));
        }
        records.push(McRecord {
            index,
            theta_deg: angles.theta_degrees(),
            phi_deg: angles.phi_degrees(),
            fidelities,
            flagged,
        });
    }

    let stats = cfg
        .methods
        .iter()
        .map(|&method| {
            let mut values: Vec<T> = records
                .iter()
                .flat_map(|r| {
                    r.fidelities
                        .iter()
                        .filter(|(m, _)| *m == method)
                        .map(|&(_, f)| f)
                })
                .collect();
            values.sort_by(|a, b| a.partial_cmp(b).expect("finite fidelities"));
            let n = values.len();
            let mean = values.iter().copied().sum::<T>() / T::from_f(n as f64);
            let median = if n % 2 == 1 {
                values[n / 2]
            } else {
                (values[n / 2 - 1] + values[n / 2]) / T::from_f(2.0)
            };
            McStats {
                method,
                mean,
                median,
                min: values[0],
                max: values[n - 1],
            }
        })
        .collect();

    Ok(McResult { records, stats })
}

/// One row of the octant table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OctantRow<T> {
    pub label: String,
    pub theta_deg: T,
    pub phi_deg: T,
    pub method: TomographyMethod,
    pub fidelity: T,
    /// For the octant representatives: resolved signs match the prepared
    /// state's coordinate signs exactly.
    pub signs_match: Option<bool>,
}

/// Runs the reconstruction round trip on one representative state per open
/// octant, the three demonstration states, and two seeded random states;
/// emits one row per (state, method).
pub fn octant_suite<T: RealScalar>(noise_sigma_rel: T, seed: u64) -> Result<Vec<OctantRow<T>>> {
    let mut states: Vec<(String, T, T, bool)> = Vec::new();
    for &theta in &[60.0, 120.0] {
        for &phi in &[45.0, 135.0, 225.0, 315.0] {
            states.push((
                format!("octant t{theta} p{phi}"),
                T::from_f(theta),
                T::from_f(phi),
                true,
            ));
        }
    }
    for (t, p) in [(58.0, 249.0), (137.0, 53.0), (88.0, 270.0)] {
        states.push((format!("demo t{t} p{p}"), T::from_f(t), T::from_f(p), false));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0x0c7a17);
    for k in 0..2 {
        let cos_theta: f64 = rng.gen_range(-0.95..=0.95);
        let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        states.push((
            format!("random {k}"),
            T::from_f(cos_theta.acos().to_degrees()),
            T::from_f(phi.to_degrees()),
            false,
        ));
    }

    let mut rows = Vec::new();
    for (i, (label, theta_deg, phi_deg, check_signs)) in states.into_iter().enumerate() {
        let angles = StateAngles::from_degrees(theta_deg, phi_deg)?;
        let n = angles_to_bloch(angles);
        let prepared = bloch_to_density(&n)?;
        let mut base = RabiConfig::default_config();
        base.seed = seed;
        base.stream = 1000 + i as u64 * 8;
        base.noise_sigma = noise_sigma_rel * base.contrast;
        let triple = simulate_triple(angles, &base, TracePath::Electron, T::zero())?;
        let fits = fit_triple(&triple, true)?;

        let (ra, _) = raqst_with_fallback(&fits.x, &fits.y, &fits.reference)?;
        let rp = rpqst(&fits.x, &fits.y)?;
        for res in [ra, rp] {
            let signs_match = if check_signs {
                res.diagnostics.signs.map(|s| {
                    s[0] == if n.nx >= T::zero() { 1 } else { -1 }
                        && s[1] == if n.ny >= T::zero() { 1 } else { -1 }
                        && s[2] == if n.nz >= T::zero() { 1 } else { -1 }
                })
            } else {
                None
            };
            rows.push(OctantRow {
                label: label.clone(),
                theta_deg,
                phi_deg,
                method: res.method,
                fidelity: fidelity(&prepared, &res.rho)?,
                signs_match,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sweep(method: TomographyMethod, quantity: PerturbedQuantity, eps: f64) -> SweepResult<f64> {
        let mut spec = SweepSpec::standard(method, quantity, eps);
        spec.mode = PerturbationMode::BothSigns;
        error_sweep(&spec).unwrap()
    }

    fn point(r: &SweepResult<f64>, theta: f64) -> &SweepPoint<f64> {
        r.points
            .iter()
            .find(|p| (p.theta_deg - theta).abs() < 1e-9)
            .expect("grid point")
    }

    #[test]
    fn zero_perturbation_is_exact() {
        for (m, q) in [
            (TomographyMethod::Raqst, PerturbedQuantity::AmplitudeX),
            (TomographyMethod::Rpqst, PerturbedQuantity::PhaseAlpha),
        ] {
            let r = sweep(m, q, 0.0);
            for p in &r.points {
                assert!((p.fidelity_plus - 1.0).abs() < 1e-12);
                assert!((p.fidelity_minus - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sweep_frozen_values() {
        // frozen from independent evaluation of the closed-form pipeline
        let r = sweep(TomographyMethod::Raqst, PerturbedQuantity::AmplitudeX, 0.01);
        let p = point(&r, 90.0);
        assert!((p.fidelity_plus - 0.99747475).abs() < 1e-7);
        assert!((p.fidelity_minus - 0.99999393).abs() < 1e-7);
        let p = point(&r, 5.0);
        assert!((p.fidelity_plus - 0.99904957).abs() < 1e-7);
        assert!((p.fidelity_minus - 0.99785589).abs() < 1e-7);

        let r = sweep(TomographyMethod::Rpqst, PerturbedQuantity::PhaseAlpha, 0.01);
        let p = point(&r, 90.0);
        assert!((p.fidelity_plus - 0.14644661).abs() < 1e-7);
        assert!((p.fidelity_minus - 0.85355339).abs() < 1e-7);
    }

    #[test]
    fn amplitude_route_pole_equator_ordering() {
        // sign-averaged susceptibility: poles worse than the equator
        for eps in [0.01, 0.10] {
            let r = sweep(TomographyMethod::Raqst, PerturbedQuantity::AmplitudeX, eps);
            let eq = point(&r, 90.0).mean();
            assert!(point(&r, 5.0).mean() < eq, "eps {eps}");
            assert!(point(&r, 175.0).mean() < eq, "eps {eps}");
        }
    }

    #[test]
    fn phase_route_pole_equator_ordering() {
        for eps in [0.01, 0.10] {
            let r = sweep(TomographyMethod::Rpqst, PerturbedQuantity::PhaseAlpha, eps);
            let eq = point(&r, 90.0).mean();
            assert!(point(&r, 5.0).mean() > eq, "eps {eps}");
            assert!(point(&r, 175.0).mean() > eq, "eps {eps}");
        }
    }

    #[test]
    fn fidelity_monotone_in_eps() {
        for (m, q) in [
            (TomographyMethod::Raqst, PerturbedQuantity::AmplitudeX),
            (TomographyMethod::Rpqst, PerturbedQuantity::PhaseAlpha),
        ] {
            let sweeps: Vec<SweepResult<f64>> = [0.1, 0.05, 0.01, 0.001]
                .iter()
                .map(|&e| sweep(m, q, e))
                .collect();
            for (i, p_large) in sweeps[0].points.iter().enumerate() {
                let mut prev = p_large.worst();
                for s in &sweeps[1..] {
                    let cur = s.points[i].worst();
                    assert!(
                        cur >= prev - 1e-12,
                        "{m} point {} not monotone: {cur} < {prev}",
                        p_large.theta_deg
                    );
                    prev = cur;
                }
            }
        }
    }

    #[test]
    fn sweep_symmetric_in_diagonal_phi() {
        // amplitude sweeps coincide for phi in {45, 135, 225, 315}
        let base = {
            let mut s = SweepSpec::<f64>::standard(
                TomographyMethod::Raqst,
                PerturbedQuantity::AmplitudeX,
                0.01,
            );
            s.mode = PerturbationMode::BothSigns;
            s
        };
        let reference = error_sweep(&base).unwrap();
        for phi in [135.0, 225.0, 315.0] {
            let mut s = base.clone();
            s.phi_deg = phi;
            let r = error_sweep(&s).unwrap();
            for (a, b) in reference.points.iter().zip(&r.points) {
                assert!((a.fidelity_plus - b.fidelity_plus).abs() < 1e-10, "phi {phi}");
                assert!((a.fidelity_minus - b.fidelity_minus).abs() < 1e-10, "phi {phi}");
            }
        }
    }

    #[test]
    fn sweep_rejects_bad_specs() {
        let mut s = SweepSpec::standard(
            TomographyMethod::Raqst,
            PerturbedQuantity::AmplitudeX,
            0.01,
        );
        s.theta_grid_deg = vec![0.0];
        assert!(error_sweep(&s).is_err());
        let mut s = SweepSpec::standard(
            TomographyMethod::Standard,
            PerturbedQuantity::AmplitudeX,
            0.01,
        );
        s.theta_grid_deg = vec![90.0];
        assert!(error_sweep(&s).is_err());
    }

    #[test]
    fn monte_carlo_noiseless_is_exact() {
        let cfg = McConfig::new(10, 0.0, 3);
        let out = monte_carlo_fidelity(&cfg).unwrap();
        for s in &out.stats {
            assert!(s.mean >= 1.0 - 1e-8, "{:?}", s.method);
            assert!(s.max >= 1.0 - 1e-8);
        }
    }

    #[test]
    fn monte_carlo_reproducible() {
        let cfg = McConfig::new(8, 0.01, 11);
        let a = monte_carlo_fidelity(&cfg).unwrap();
        let b = monte_carlo_fidelity(&cfg).unwrap();
        for (ra, rb) in a.records.iter().zip(&b.records) {
            assert_eq!(ra.theta_deg, rb.theta_deg);
            for ((ma, fa), (mb, fb)) in ra.fidelities.iter().zip(&rb.fidelities) {
                assert_eq!(ma, mb);
                assert_eq!(fa, fb, "bit-identical fidelities");
            }
        }
    }

    #[test]
    fn monte_carlo_noise_keeps_high_median() {
        let cfg = McConfig::new(40, 0.01, 1);
        let out = monte_carlo_fidelity(&cfg).unwrap();
        for s in &out.stats {
            assert!(s.median >= 0.99, "{:?} median {}", s.method, s.median);
        }
    }

    #[test]
    fn drift_favors_phase_route() {
        let mut cfg = McConfig::new(40, 0.01, 1);
        cfg.session_drift = 0.05;
        let out = monte_carlo_fidelity(&cfg).unwrap();
        let mean = |m: TomographyMethod| {
            out.stats
                .iter()
                .find(|s| s.method == m)
                .expect("method present")
                .mean
        };
        assert!(mean(TomographyMethod::Rpqst) >= mean(TomographyMethod::Raqst));
    }

    #[test]
    fn octant_suite_noiseless() {
        let rows = octant_suite(0.0, 5).unwrap();
        // 8 octants + 3 demos + 2 random, two methods each
        assert_eq!(rows.len(), 13 * 2);
        for row in &rows {
            assert!(row.fidelity >= 1.0 - 1e-8, "{} {}", row.label, row.method);
            if let Some(ok) = row.signs_match {
                assert!(ok, "{}", row.label);
            }
        }
    }

    #[test]
    fn octant_suite_with_noise() {
        let rows = octant_suite(0.01, 5).unwrap();
        for row in &rows {
            assert!(row.fidelity >= 0.98, "{} {} {}", row.label, row.method, row.fidelity);
        }
    }
}
