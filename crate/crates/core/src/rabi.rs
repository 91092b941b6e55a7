//! Rabi-trace synthesis: pulse-sequence execution, readout, noise and drift
//! models, and the register initialisation sequence.
//!
//! Signal phase convention (fixed once, used by every reconstruction): an
//! x-axis drive (`zeta = 0`) on a state with Bloch vector `n` produces
//! `p0(t) = (1 + nz cos(w t) + ny sin(w t)) / 2`, i.e. a fitted cosine phase
//! of `atan2(-ny, nz)`; a y-axis drive (`zeta = pi/2`) produces
//! `p0(t) = (1 + nz cos(w t) - nx sin(w t)) / 2`, phase `atan2(nx, nz)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates::{
    build_init_gates, build_v_gates, hybrid_ket, level_index, subspace_rotation, GateOp,
    HybridState, Spin1, U3Variant, HYBRID_DIM,
};
use crate::scalar::{base_tol, RealScalar};
use crate::spin::{DensityMatrix, PureState, StateAngles};

/// Default Rabi angular frequency, rad/us (period 10 us).
pub const DEFAULT_OMEGA: f64 = 0.6283185307179586;

/// Trace synthesis parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RabiConfig<T> {
    /// Drive axis phase zeta: 0 for the x drive, pi/2 for the y drive.
    pub axis_phase: T,
    /// Rabi angular frequency, rad/us.
    pub rabi_frequency: T,
    /// Sample times, us; strictly increasing, at least 8 points.
    pub times_us: Vec<T>,
    /// Optical contrast C of the readout signal.
    pub contrast: T,
    /// Signal offset O.
    pub offset: T,
    /// Optional exponential envelope time constant, us.
    pub decay_t_us: Option<T>,
    /// Standard deviation of the additive Gaussian noise per point.
    pub noise_sigma: T,
    /// Contrast multiplier at the first sample (1 = no drift).
    pub drift_start: T,
    /// Contrast multiplier at the last sample.
    pub drift_end: T,
    /// RNG seed.
    pub seed: u64,
    /// RNG substream, so batches can derive independent per-trace noise
    /// from one seed (parallel and serial generation agree exactly).
    pub stream: u64,
}

impl<T: RealScalar> RabiConfig<T> {
    /// Desk-scale defaults: 61 points over 3 Rabi periods, C = 0.3, O = 0.7,
    /// no decay, no noise, no drift.
    pub fn default_config() -> Self {
        let omega = T::from_f(DEFAULT_OMEGA);
        Self {
            axis_phase: T::zero(),
            rabi_frequency: omega,
            times_us: Self::grid(T::from_f(3.0) * T::TAU() / omega, 61),
            contrast: T::from_f(0.3),
            offset: T::from_f(0.7),
            decay_t_us: None,
            noise_sigma: T::zero(),
            drift_start: T::one(),
            drift_end: T::one(),
            seed: 0,
            stream: 0,
        }
    }

    /// Uniform grid `0..=t_max` with `points` samples.
    pub fn grid(t_max: T, points: usize) -> Vec<T> {
        let n = points.max(2);
        (0..n)
            .map(|k| t_max * T::from_f(k as f64) / T::from_f((n - 1) as f64))
            .collect()
    }

    pub fn with_axis_phase(mut self, zeta: T) -> Self {
        self.axis_phase = zeta;
        self
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    pub fn with_drift(mut self, start: T, end: T) -> Self {
        self.drift_start = start;
        self.drift_end = end;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.times_us.len() < 8 {
            return Err(Error::InvalidConfig(format!(
                "need at least 8 sample times, got {}",
                self.times_us.len()
            )));
        }
        if self.times_us.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig("time grid must be strictly increasing".into()));
        }
        if !self.contrast.is_finite() || self.contrast <= T::zero() {
            return Err(Error::InvalidConfig("contrast must be positive".into()));
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < T::zero() {
            return Err(Error::InvalidConfig("noise sigma must be non-negative".into()));
        }
        if !self.rabi_frequency.is_finite() || self.rabi_frequency <= T::zero() {
            return Err(Error::InvalidConfig("rabi frequency must be positive".into()));
        }
        if let Some(t) = self.decay_t_us {
            if !t.is_finite() || t <= T::zero() {
                return Err(Error::InvalidConfig("decay time must be positive".into()));
            }
        }
        Ok(())
    }

    fn drift_factor(&self, t: T) -> T {
        let t0 = self.times_us[0];
        let t1 = *self.times_us.last().expect("validated non-empty grid");
        if t1 == t0 {
            return self.drift_start;
        }
        self.drift_start + (self.drift_end - self.drift_start) * (t - t0) / (t1 - t0)
    }

    fn decay_factor(&self, t: T) -> T {
        match self.decay_t_us {
            Some(tc) => (-t / tc).exp(),
            None => T::one(),
        }
    }
}

/// Trace metadata carried alongside the samples.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceMeta<T> {
    pub config: RabiConfig<T>,
    /// Human-readable description of the prepared state.
    pub prepared_state: String,
}

/// A synthesized readout time series.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RabiTrace<T> {
    pub times_us: Vec<T>,
    pub signal: Vec<T>,
    pub meta: TraceMeta<T>,
}

/// Noise stream for one trace: ChaCha keyed by the seed, substream by index.
fn noise_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn synthesize<T: RealScalar>(
    cfg: &RabiConfig<T>,
    prepared_state: String,
    mut p0: impl FnMut(T) -> T,
) -> RabiTrace<T> {
    let mut rng = noise_rng(cfg.seed, cfg.stream);
    let signal: Vec<T> = cfg
        .times_us
        .iter()
        .map(|&t| {
            let clean = cfg.offset
                + cfg.contrast * cfg.drift_factor(t) * p0(t) * cfg.decay_factor(t);
            if cfg.noise_sigma > T::zero() {
                // sampled in f64 so f32/f64 instantiations share one stream
                let g: f64 = rng.sample(StandardNormal);
                clean + cfg.noise_sigma * T::from_f(g)
            } else {
                clean
            }
        })
        .collect();
    RabiTrace {
        times_us: cfg.times_us.clone(),
        signal,
        meta: TraceMeta {
            config: cfg.clone(),
            prepared_state,
        },
    }
}

/// Rabi trace of a qubit state: per sample time, rotate by
/// `exp(-i w t I_zeta)`, read the `|0>` population, apply contrast, offset,
/// envelope and noise.
pub fn electron_rabi_trace<T: RealScalar>(
    state: &DensityMatrix<T>,
    cfg: &RabiConfig<T>,
) -> Result<RabiTrace<T>> {
    cfg.validate()?;
    if state.dim() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "electron trace needs a 2-dim state, got {}",
            state.dim()
        )));
    }
    let rho = state.matrix().clone();
    let desc = format!("electron state, zeta={}", cfg.axis_phase);
    Ok(synthesize(cfg, desc, |t| {
        let gate = subspace_rotation::<T>(2, 0, 1, cfg.axis_phase, cfg.rabi_frequency * t)
            .expect("valid qubit rotation");
        let rotated = gate
            .unitary_matrix()
            .expect("rotation is unitary")
            .sandwich(&rho)
            .expect("2x2 product");
        rotated[(0, 0)].re
    }))
}

/// Reference trace: the drive applied to the eigenstate `|0>`.
pub fn reference_trace<T: RealScalar>(cfg: &RabiConfig<T>) -> Result<RabiTrace<T>> {
    let zero = DensityMatrix::from_pure(&PureState::basis(2, 0));
    let mut trace = electron_rabi_trace(&zero, cfg)?;
    trace.meta.prepared_state = format!("reference |0>, zeta={}", cfg.axis_phase);
    Ok(trace)
}

/// Nuclear Rabi trace through the full register circuit: starting from the
/// ideal `|0,0>`, apply `v1`, the prep `v2(theta, phi)`, the drive
/// `v3(w t, zeta)` and the readout flip `v4`, then read the electron
/// `m_S = 0` population.
pub fn nuclear_rabi_trace<T: RealScalar>(
    prep: StateAngles<T>,
    cfg: &RabiConfig<T>,
) -> Result<RabiTrace<T>> {
    cfg.validate()?;
    let v = build_v_gates::<T>(prep.theta, prep.phi, T::zero(), cfg.axis_phase);
    let psi0 = hybrid_ket::<T>(Spin1::Zero, Spin1::Zero);
    let psi1 = {
        let after_v1 = v.v1.unitary_matrix()?.mul_vec(psi0.amplitudes())?;
        v.v2.unitary_matrix()?.mul_vec(&after_v1)?
    };
    let v4 = v.v4.unitary_matrix()?.clone();
    let (a, b) = crate::gates::nuclear_span();
    let desc = format!(
        "nuclear state theta={} phi={}, zeta={}",
        prep.theta, prep.phi, cfg.axis_phase
    );
    Ok(synthesize(cfg, desc, |t| {
        let drive = subspace_rotation::<T>(HYBRID_DIM, a, b, cfg.axis_phase, cfg.rabi_frequency * t)
            .expect("valid span rotation");
        let psi2 = drive
            .unitary_matrix()
            .expect("drive is unitary")
            .mul_vec(&psi1)
            .expect("9-dim product");
        let psi3 = v4.mul_vec(&psi2).expect("9-dim product");
        // electron m_S = 0 population
        (3..6).map(|i| psi3[i].norm_sqr()).sum()
    }))
}

/// Optical readout signal `O + C * p(m_S = 0)`: sums the electron `m_S = 0`
/// populations over all nuclear states (the readout does not resolve them).
pub fn readout<T: RealScalar>(state: &HybridState<T>, contrast: T, offset: T) -> Result<T> {
    if state.dim() != HYBRID_DIM {
        return Err(Error::DimensionMismatch(format!(
            "readout needs the {HYBRID_DIM}-dim register, got {}",
            state.dim()
        )));
    }
    let p: T = Spin1::ALL
        .iter()
        .map(|&n| state.population(level_index(Spin1::Zero, n)))
        .sum();
    Ok(offset + contrast * p)
}

/// Outcome of the initialisation sequence.
#[derive(Debug, Clone)]
pub struct InitOutcome<T> {
    pub state: DensityMatrix<T>,
    /// Population of `|0,0>` in the final state.
    pub population_00: T,
    /// Set when a non-unitary gate variant forced a trace renormalization.
    pub renormalized: bool,
}

/// Runs the register initialisation: a laser reset, the two conditional
/// microwave swaps, the two conditional radio-frequency swaps, and the final
/// laser reset. With the corrected gate set this pumps any input into
/// `|0,0>`; the non-unitary variant renormalizes by the trace after each
/// step and flags that it did.
pub fn run_init_sequence<T: RealScalar>(
    input: &HybridState<T>,
    variant: U3Variant,
) -> Result<InitOutcome<T>> {
    if input.dim() != HYBRID_DIM {
        return Err(Error::DimensionMismatch(format!(
            "initialisation needs the {HYBRID_DIM}-dim register, got {}",
            input.dim()
        )));
    }
    let mut rho = input.to_density().into_matrix();
    let mut renormalized = false;
    for (_, gate) in init_sequence_ops::<T>(variant) {
        rho = gate.apply_matrix(&rho)?;
        let tr = rho.trace().re;
        if (tr - T::one()).abs() > base_tol::<T>() {
            if tr <= base_tol::<T>() {
                return Err(Error::InvalidState(
                    "initialisation gate annihilated the state (zero trace)".into(),
                ));
            }
            rho = rho.scale_re(T::one() / tr);
            renormalized = true;
        }
    }
    let state = DensityMatrix::new(rho)?;
    let population_00 = state.population(level_index(Spin1::Zero, Spin1::Zero));
    Ok(InitOutcome {
        state,
        population_00,
        renormalized,
    })
}

/// The labelled gate sequence executed by [`run_init_sequence`].
pub fn init_sequence_ops<T: RealScalar>(variant: U3Variant) -> Vec<(String, GateOp<T>)> {
    let g = build_init_gates::<T>(variant);
    vec![
        ("laser".into(), g.u5.clone()),
        ("u1".into(), g.u1),
        ("u2".into(), g.u2),
        ("u3".into(), g.u3),
        ("u4".into(), g.u4),
        ("laser".into(), g.u5),
    ]
}

/// The three traces a tomography run consumes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceTriple<T> {
    pub x: RabiTrace<T>,
    pub y: RabiTrace<T>,
    pub reference: RabiTrace<T>,
}

/// Which physical path generates the traces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TracePath {
    /// Direct drive on a qubit prepared analytically from the angles.
    Electron,
    /// Full register circuit with the nuclear qubit read via the electron.
    Nuclear,
}

/// Synthesizes the (x, y, reference) triple for a prepared state.
///
/// Streams are derived from `base.stream` as `+0, +1, +2`. `session_drift`
/// models cumulative contrast loss across the measurement session: each
/// trace loses that fraction of contrast over its duration, continuing from
/// where the previous trace stopped (order x, y, reference).
pub fn simulate_triple<T: RealScalar>(
    prep: StateAngles<T>,
    base: &RabiConfig<T>,
    path: TracePath,
    session_drift: T,
) -> Result<TraceTriple<T>> {
    let d = session_drift;
    let seg = |k: f64| {
        let start = T::one() - d * T::from_f(k);
        let end = T::one() - d * T::from_f(k + 1.0);
        (start, end)
    };
    let (xs, xe) = seg(0.0);
    let (ys, ye) = seg(1.0);
    let (rs, re) = seg(2.0);

    let x_cfg = base
        .clone()
        .with_axis_phase(T::zero())
        .with_stream(base.stream)
        .with_drift(xs, xe);
    let y_cfg = base
        .clone()
        .with_axis_phase(T::FRAC_PI_2())
        .with_stream(base.stream + 1)
        .with_drift(ys, ye);
    let r_cfg = base
        .clone()
        .with_axis_phase(T::zero())
        .with_stream(base.stream + 2)
        .with_drift(rs, re);

    match path {
        TracePath::Electron => {
            let rho = crate::spin::bloch_to_density(&crate::spin::angles_to_bloch(prep))?;
            Ok(TraceTriple {
                x: electron_rabi_trace(&rho, &x_cfg)?,
                y: electron_rabi_trace(&rho, &y_cfg)?,
                reference: reference_trace(&r_cfg)?,
            })
        }
        TracePath::Nuclear => {
            let eigen = StateAngles::new(T::zero(), T::zero())?;
            Ok(TraceTriple {
                x: nuclear_rabi_trace(prep, &x_cfg)?,
                y: nuclear_rabi_trace(prep, &y_cfg)?,
                reference: nuclear_rabi_trace(eigen, &r_cfg)?,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::{angles_to_bloch, bloch_to_density, BlochVector};

    fn noiseless() -> RabiConfig<f64> {
        RabiConfig::default_config()
    }

    #[test]
    fn eigenstate_reference_is_cosine_squared() {
        let mut cfg = noiseless();
        cfg.contrast = 1.0;
        cfg.offset = 0.0;
        let trace = reference_trace(&cfg).unwrap();
        for (&t, &s) in trace.times_us.iter().zip(&trace.signal) {
            let expect = (cfg.rabi_frequency * t / 2.0).cos().powi(2);
            assert!((s - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn axis_fixed_point_is_flat() {
        // state on the x axis, x drive: constant signal
        let rho = bloch_to_density(&BlochVector::new(1.0, 0.0, 0.0)).unwrap();
        let trace = electron_rabi_trace(&rho, &noiseless()).unwrap();
        let first = trace.signal[0];
        assert!(trace.signal.iter().all(|&s| (s - first).abs() < 1e-12));
    }

    #[test]
    fn closed_form_matches_gate_simulation() {
        // 50 pseudo-random states, both drive axes
        let mut lcg = 3u64;
        let mut next = || {
            lcg = lcg.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((lcg >> 11) as f64) / ((1u64 << 53) as f64)
        };
        for _ in 0..50 {
            let theta = (1.0 - 2.0 * next()).acos();
            let phi = next() * std::f64::consts::TAU;
            let angles = StateAngles::new(theta, phi).unwrap();
            let n = angles_to_bloch(angles);
            let rho = bloch_to_density(&n).unwrap();
            for zeta in [0.0, std::f64::consts::FRAC_PI_2] {
                let cfg = noiseless().with_axis_phase(zeta);
                let trace = electron_rabi_trace(&rho, &cfg).unwrap();
                let (a_sin, label) = if zeta == 0.0 {
                    (n.ny, "x")
                } else {
                    (-n.nx, "y")
                };
                for (&t, &s) in trace.times_us.iter().zip(&trace.signal) {
                    let w = cfg.rabi_frequency * t;
                    let p0 = 0.5 * (1.0 + n.nz * w.cos() + a_sin * w.sin());
                    let expect = cfg.offset + cfg.contrast * p0;
                    assert!((s - expect).abs() < 1e-10, "{label} drive");
                }
            }
        }
    }

    #[test]
    fn seeded_traces_are_bit_identical() {
        let mut cfg = noiseless();
        cfg.noise_sigma = 0.01;
        cfg.seed = 7;
        cfg.stream = 3;
        let rho = bloch_to_density(&BlochVector::new(0.0, 0.0, 1.0)).unwrap();
        let a = electron_rabi_trace(&rho, &cfg).unwrap();
        let b = electron_rabi_trace(&rho, &cfg).unwrap();
        assert_eq!(a.signal, b.signal);
        // a different stream gives a different realization
        let c = electron_rabi_trace(&rho, &cfg.clone().with_stream(4)).unwrap();
        assert_ne!(a.signal, c.signal);
    }

    #[test]
    fn nuclear_trace_trivial_preparations() {
        let cfg = noiseless();
        // prep theta = 0: plain Rabi on the eigenstate
        let t0 = nuclear_rabi_trace(StateAngles::new(0.0, 0.0).unwrap(), &cfg).unwrap();
        for (&t, &s) in t0.times_us.iter().zip(&t0.signal) {
            let expect = cfg.offset + cfg.contrast * (cfg.rabi_frequency * t / 2.0).cos().powi(2);
            assert!((s - expect).abs() < 1e-12);
        }
        // prep theta = pi: inverted
        let t1 = nuclear_rabi_trace(StateAngles::new(std::f64::consts::PI, 0.0).unwrap(), &cfg)
            .unwrap();
        for (&t, &s) in t1.times_us.iter().zip(&t1.signal) {
            let expect = cfg.offset + cfg.contrast * (cfg.rabi_frequency * t / 2.0).sin().powi(2);
            assert!((s - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn nuclear_trace_matches_electron_closed_form() {
        // the register circuit reproduces the plain qubit trace of the
        // prepared state, for both drive axes
        let prep = StateAngles::from_degrees(58.0, 249.0).unwrap();
        let n = angles_to_bloch(prep);
        for zeta in [0.0, std::f64::consts::FRAC_PI_2] {
            let cfg = noiseless().with_axis_phase(zeta);
            let trace = nuclear_rabi_trace(prep, &cfg).unwrap();
            let a_sin = if zeta == 0.0 { n.ny } else { -n.nx };
            for (&t, &s) in trace.times_us.iter().zip(&trace.signal) {
                let w = cfg.rabi_frequency * t;
                let p0 = 0.5 * (1.0 + n.nz * w.cos() + a_sin * w.sin());
                assert!((s - (cfg.offset + cfg.contrast * p0)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn nuclear_trace_periodicity() {
        let prep = StateAngles::from_degrees(58.0, 249.0).unwrap();
        let mut cfg = noiseless();
        let period = std::f64::consts::TAU / cfg.rabi_frequency;
        // sample one period and the shifted copy on the same phase grid
        cfg.times_us = RabiConfig::<f64>::grid(period, 33);
        let a = nuclear_rabi_trace(prep, &cfg).unwrap();
        let mut shifted = cfg.clone();
        shifted.times_us = cfg.times_us.iter().map(|t| t + period).collect();
        let b = nuclear_rabi_trace(prep, &shifted).unwrap();
        for (&x, &y) in a.signal.iter().zip(&b.signal) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn readout_examples() {
        let s = HybridState::Pure(hybrid_ket::<f64>(Spin1::Zero, Spin1::Zero));
        assert!((readout(&s, 1.0, 0.0).unwrap() - 1.0).abs() < 1e-15);
        let s = HybridState::Pure(hybrid_ket::<f64>(Spin1::Minus, Spin1::Plus));
        assert!(readout(&s, 1.0, 0.0).unwrap().abs() < 1e-15);
    }

    #[test]
    fn init_sequence_corrected_pumps_mixed_state() {
        let mixed = HybridState::Density(DensityMatrix::<f64>::maximally_mixed(9));
        let out = run_init_sequence(&mixed, U3Variant::Corrected).unwrap();
        assert!((out.population_00 - 1.0).abs() < 1e-12);
        assert!(!out.renormalized);
        // already initialised input is untouched
        let ready = HybridState::Pure(hybrid_ket::<f64>(Spin1::Zero, Spin1::Zero));
        let out = run_init_sequence(&ready, U3Variant::Corrected).unwrap();
        assert!((out.population_00 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn init_sequence_trace_preserved_from_basis_state() {
        let input = HybridState::Pure(hybrid_ket::<f64>(Spin1::Plus, Spin1::Minus));
        for variant in [U3Variant::Corrected, U3Variant::NonUnitary] {
            let out = run_init_sequence(&input, variant).unwrap();
            let tr = out.state.matrix().trace().re;
            assert!((tr - 1.0).abs() < 1e-12, "{variant:?}");
        }
    }

    #[test]
    fn init_sequence_non_unitary_characterization() {
        // the defective gate set still pumps the mixed state to |0,0>, but
        // only after a flagged trace renormalization
        let mixed = HybridState::Density(DensityMatrix::<f64>::maximally_mixed(9));
        let out = run_init_sequence(&mixed, U3Variant::NonUnitary).unwrap();
        assert!(out.renormalized);
        assert!((out.population_00 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn init_sequence_non_unitary_annihilation_is_an_error() {
        // |0,0> reaches the defective u3 untouched (no swap condition fires)
        // and sits exactly in its annihilated m_S = 0 subspace
        let input = HybridState::Pure(hybrid_ket::<f64>(Spin1::Zero, Spin1::Zero));
        assert!(run_init_sequence(&input, U3Variant::NonUnitary).is_err());
    }

    #[test]
    fn triple_streams_and_drift_segments() {
        let prep = StateAngles::from_degrees(60.0, 30.0).unwrap();
        let mut base = noiseless();
        base.seed = 11;
        base.stream = 100;
        let triple = simulate_triple(prep, &base, TracePath::Electron, 0.05).unwrap();
        assert_eq!(triple.x.meta.config.stream, 100);
        assert_eq!(triple.y.meta.config.stream, 101);
        assert_eq!(triple.reference.meta.config.stream, 102);
        assert!((triple.x.meta.config.drift_start - 1.0).abs() < 1e-15);
        assert!((triple.x.meta.config.drift_end - 0.95).abs() < 1e-15);
        assert!((triple.reference.meta.config.drift_start - 0.90).abs() < 1e-15);
        assert!((triple.reference.meta.config.drift_end - 0.85).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        let mut cfg = noiseless();
        cfg.times_us.truncate(5);
        assert!(cfg.validate().is_err());
        let mut cfg = noiseless();
        cfg.times_us[3] = cfg.times_us[2];
        assert!(cfg.validate().is_err());
        let mut cfg = noiseless();
        cfg.contrast = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = noiseless();
        cfg.noise_sigma = -0.1;
        assert!(cfg.validate().is_err());
    }
}
