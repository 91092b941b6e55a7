//! Qubit and spin-register state representations: kets, density matrices,
//! Bloch vectors and polar angles, the conversions among them, and fidelity.
//!
//! Conventions fixed here and used everywhere else:
//! * basis index 0 is `|0>` (Bloch north pole, `nz = +1`), index 1 is `|1>`;
//! * a pure state with polar angle `theta` and azimuth `phi` is
//!   `cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>`;
//! * its Bloch vector is `(sin t cos p, sin t sin p, cos t)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, ComplexMatrix};
use crate::scalar::{base_tol, consistency_tol, eigen_tol, norm_tol, wrap_two_pi, RealScalar, C};

/// Pauli X.
pub fn pauli_x<T: RealScalar>() -> ComplexMatrix<T> {
    let mut m = ComplexMatrix::zeros(2, 2);
    m[(0, 1)] = T::c_one();
    m[(1, 0)] = T::c_one();
    m
}

/// Pauli Y.
pub fn pauli_y<T: RealScalar>() -> ComplexMatrix<T> {
    let mut m = ComplexMatrix::zeros(2, 2);
    m[(0, 1)] = -T::c_i();
    m[(1, 0)] = T::c_i();
    m
}

/// Pauli Z.
pub fn pauli_z<T: RealScalar>() -> ComplexMatrix<T> {
    let mut m = ComplexMatrix::identity(2);
    m[(1, 1)] = -T::c_one();
    m
}

/// Normalized state vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PureState<T> {
    amplitudes: Vec<C<T>>,
}

impl<T: RealScalar> PureState<T> {
    /// Validates unit norm within the base tolerance.
    pub fn new(amplitudes: Vec<C<T>>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidState("empty state vector".into()));
        }
        if amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidState("non-finite amplitude".into()));
        }
        let norm: T = amplitudes.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        if (norm - T::one()).abs() > base_tol::<T>() {
            return Err(Error::InvalidState(format!("state norm {norm} != 1")));
        }
        Ok(Self { amplitudes })
    }

    /// Basis ket `|index>` in `dim` dimensions.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut amplitudes = vec![T::c_zero(); dim];
        amplitudes[index] = T::c_one();
        Self { amplitudes }
    }

    /// `cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>`.
    pub fn from_angles(angles: StateAngles<T>) -> Self {
        let half = angles.theta / T::from_f(2.0);
        let a0 = C::new(half.cos(), T::zero());
        let a1 = C::from_polar(half.sin(), angles.phi);
        Self { amplitudes: vec![a0, a1] }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C<T>] {
        &self.amplitudes
    }

    /// Projector `|psi><psi|`.
    pub fn outer(&self) -> ComplexMatrix<T> {
        ComplexMatrix::outer(&self.amplitudes, &self.amplitudes)
    }

    /// Population of basis state `index`.
    pub fn population(&self, index: usize) -> T {
        self.amplitudes[index].norm_sqr()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> Result<C<T>> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch("inner product dims differ".into()));
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * *b)
            .fold(T::c_zero(), |acc, z| acc + z))
    }
}

/// Hermitian, trace-one, positive-semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix<T> {
    mat: ComplexMatrix<T>,
}

impl<T: RealScalar> DensityMatrix<T> {
    /// Validates Hermiticity and trace within the base tolerance and
    /// eigenvalues above `-eigen_tol`.
    pub fn new(mat: ComplexMatrix<T>) -> Result<Self> {
        if !mat.is_square() {
            return Err(Error::InvalidState("density matrix must be square".into()));
        }
        if !mat.is_finite() {
            return Err(Error::InvalidState("non-finite density matrix entry".into()));
        }
        let tol = base_tol::<T>();
        let herm = mat.hermitian_defect();
        if herm > tol {
            return Err(Error::InvalidState(format!("Hermiticity defect {herm}")));
        }
        let tr = mat.trace();
        if (tr.re - T::one()).abs() > tol || tr.im.abs() > tol {
            return Err(Error::InvalidState(format!("trace {} + {}i != 1", tr.re, tr.im)));
        }
        let min_ev = if mat.rows() == 1 {
            mat[(0, 0)].re
        } else {
            hermitian_eigenvalues(&mat)?[0]
        };
        if min_ev < -eigen_tol::<T>() {
            return Err(Error::InvalidState(format!("negative eigenvalue {min_ev}")));
        }
        Ok(Self { mat })
    }

    pub fn from_pure(state: &PureState<T>) -> Self {
        // |psi><psi| of a validated ket is valid by construction
        Self { mat: state.outer() }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            mat: ComplexMatrix::identity(dim).scale_re(T::one() / T::from_f(dim as f64)),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix<T> {
        &self.mat
    }

    pub fn into_matrix(self) -> ComplexMatrix<T> {
        self.mat
    }

    /// `Tr(rho^2)`.
    pub fn purity(&self) -> T {
        self.mat
            .mul(&self.mat)
            .expect("square matrix")
            .trace()
            .re
    }

    /// Diagonal population `<i|rho|i>`.
    pub fn population(&self, index: usize) -> T {
        self.mat[(index, index)].re
    }
}

/// Serialized form of a density matrix: `{"dim": 2, "re": [[..]], "im": [[..]]}`.
#[derive(Serialize, Deserialize)]
struct DensityRepr<T> {
    dim: usize,
    re: Vec<Vec<T>>,
    im: Vec<Vec<T>>,
}

impl<T: RealScalar> Serialize for DensityMatrix<T> {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        DensityRepr {
            dim: self.dim(),
            re: self.mat.re_rows(),
            im: self.mat.im_rows(),
        }
        .serialize(serializer)
    }
}

impl<'de, T: RealScalar> Deserialize<'de> for DensityMatrix<T> {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = DensityRepr::<T>::deserialize(deserializer)?;
        let mat = ComplexMatrix::from_re_im(&repr.re, &repr.im).map_err(serde::de::Error::custom)?;
        if mat.rows() != repr.dim {
            return Err(serde::de::Error::custom("dim field disagrees with matrix shape"));
        }
        DensityMatrix::new(mat).map_err(serde::de::Error::custom)
    }
}

/// Bloch vector coordinates `(nx, ny, nz)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochVector<T> {
    pub nx: T,
    pub ny: T,
    pub nz: T,
}

impl<T: RealScalar> BlochVector<T> {
    pub fn new(nx: T, ny: T, nz: T) -> Self {
        Self { nx, ny, nz }
    }

    pub fn norm(&self) -> T {
        (self.nx * self.nx + self.ny * self.ny + self.nz * self.nz).sqrt()
    }

    pub fn dot(&self, other: &Self) -> T {
        self.nx * other.nx + self.ny * other.ny + self.nz * other.nz
    }

    pub fn distance(&self, other: &Self) -> T {
        let dx = self.nx - other.nx;
        let dy = self.ny - other.ny;
        let dz = self.nz - other.nz;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    /// Rescales to unit length. Errors on the zero vector.
    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == T::zero() {
            return Err(Error::Domain("cannot normalize zero Bloch vector".into()));
        }
        Ok(Self::new(self.nx / n, self.ny / n, self.nz / n))
    }
}

/// Polar angle `theta` in `[0, pi]` and azimuth `phi` in `[0, 2 pi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateAngles<T> {
    pub theta: T,
    pub phi: T,
}

impl<T: RealScalar> StateAngles<T> {
    /// Validates the theta range (small overshoot tolerated) and wraps phi.
    pub fn new(theta: T, phi: T) -> Result<Self> {
        let tol = norm_tol::<T>();
        if theta < -tol || theta > T::PI() + tol {
            return Err(Error::Domain(format!("theta {theta} outside [0, pi]")));
        }
        let theta = theta.max(T::zero()).min(T::PI());
        Ok(Self { theta, phi: wrap_two_pi(phi) })
    }

    pub fn from_degrees(theta_deg: T, phi_deg: T) -> Result<Self> {
        let k = T::PI() / T::from_f(180.0);
        Self::new(theta_deg * k, phi_deg * k)
    }

    pub fn theta_degrees(&self) -> T {
        self.theta * T::from_f(180.0) / T::PI()
    }

    pub fn phi_degrees(&self) -> T {
        self.phi * T::from_f(180.0) / T::PI()
    }
}

/// `rho = (I + nx sx + ny sy + nz sz) / 2`.
///
/// Errors when the vector pokes outside the unit sphere beyond tolerance.
pub fn bloch_to_density<T: RealScalar>(v: &BlochVector<T>) -> Result<DensityMatrix<T>> {
    let n = v.norm();
    if n > T::one() + norm_tol::<T>() {
        return Err(Error::InvalidState(format!("Bloch vector norm {n} > 1")));
    }
    let half = T::from_f(0.5);
    let mut m = ComplexMatrix::zeros(2, 2);
    m[(0, 0)] = C::new((T::one() + v.nz) * half, T::zero());
    m[(1, 1)] = C::new((T::one() - v.nz) * half, T::zero());
    m[(0, 1)] = C::new(v.nx * half, -v.ny * half);
    m[(1, 0)] = C::new(v.nx * half, v.ny * half);
    // for |v| marginally above 1 the eigenvalue floor is what matters
    DensityMatrix::new(m)
}

/// Inverse of [`bloch_to_density`]: `n_i = Tr(rho s_i)`.
pub fn density_to_bloch<T: RealScalar>(rho: &DensityMatrix<T>) -> Result<BlochVector<T>> {
    if rho.dim() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "Bloch coordinates need a 2-dim state, got {}",
            rho.dim()
        )));
    }
    let m = rho.matrix();
    let two = T::from_f(2.0);
    Ok(BlochVector::new(
        m[(0, 1)].re * two,
        -m[(0, 1)].im * two,
        m[(0, 0)].re - m[(1, 1)].re,
    ))
}

/// `(sin t cos p, sin t sin p, cos t)`.
pub fn angles_to_bloch<T: RealScalar>(a: StateAngles<T>) -> BlochVector<T> {
    let st = a.theta.sin();
    BlochVector::new(st * a.phi.cos(), st * a.phi.sin(), a.theta.cos())
}

/// Inverse of [`angles_to_bloch`] for unit vectors.
///
/// At the poles phi is undefined; it is returned as 0 and the second tuple
/// element is set.
pub fn bloch_to_angles<T: RealScalar>(v: &BlochVector<T>) -> Result<(StateAngles<T>, bool)> {
    if (v.norm() - T::one()).abs() > consistency_tol::<T>() {
        return Err(Error::Domain(format!(
            "angles are defined for unit Bloch vectors; norm = {}",
            v.norm()
        )));
    }
    let transverse = (v.nx * v.nx + v.ny * v.ny).sqrt();
    let theta = transverse.atan2(v.nz);
    if transverse <= base_tol::<T>() {
        let theta = if v.nz >= T::zero() { T::zero() } else { T::PI() };
        return Ok((StateAngles { theta, phi: T::zero() }, true));
    }
    let phi = wrap_two_pi(v.ny.atan2(v.nx));
    Ok((StateAngles { theta, phi }, false))
}

/// Normalized Hilbert-Schmidt overlap
/// `F = Tr(a b) / sqrt(Tr(a^2) Tr(b^2))`, clamped into `[0, 1]`.
pub fn fidelity<T: RealScalar>(a: &DensityMatrix<T>, b: &DensityMatrix<T>) -> Result<T> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "fidelity of {}-dim and {}-dim states",
            a.dim(),
            b.dim()
        )));
    }
    let overlap = a.matrix().mul(b.matrix())?.trace().re;
    let denom = (a.purity() * b.purity()).sqrt();
    let f = overlap / denom;
    Ok(f.max(T::zero()).min(T::one()))
}

/// `U |psi>`; checks that the result is still normalized.
pub fn apply_unitary_state<T: RealScalar>(
    u: &ComplexMatrix<T>,
    state: &PureState<T>,
) -> Result<PureState<T>> {
    PureState::new(u.mul_vec(state.amplitudes())?)
}

/// `U rho U^dagger`.
pub fn apply_unitary_density<T: RealScalar>(
    u: &ComplexMatrix<T>,
    rho: &DensityMatrix<T>,
) -> Result<DensityMatrix<T>> {
    DensityMatrix::new(u.sandwich(rho.matrix())?)
}

/// Single-branch arctangent forms of the angle conversion.
///
/// These use one-argument `atan` with sign prefactors and are valid only on
/// restricted domains; the quadrant-aware functions above are the production
/// path. They are kept to document exactly where the single-branch forms
/// break down (see the unit tests).
pub mod single_branch {
    use super::*;

    /// `atan(sqrt(nx^2 + ny^2) / nz) + pi/2`.
    ///
    /// Disagrees with the quadrant-aware polar angle; in particular it yields
    /// `pi/2` at both poles.
    pub fn theta<T: RealScalar>(v: &BlochVector<T>) -> T {
        let transverse = (v.nx * v.nx + v.ny * v.ny).sqrt();
        (transverse / v.nz).atan() + T::FRAC_PI_2()
    }

    /// `pi - atan(nx / ny) - sign(ny) * pi/2`, mapped into `[0, 2 pi)`.
    ///
    /// Equivalent to `atan2(ny, nx)` whenever `ny != 0`; singular at `ny = 0`.
    pub fn phi<T: RealScalar>(v: &BlochVector<T>) -> T {
        let sign = v.ny.signum();
        wrap_two_pi(T::PI() - (v.nx / v.ny).atan() - sign * T::FRAC_PI_2())
    }
}

#[cfg(test)]
#[allow(clippy::excessive_precision, clippy::approx_constant)] // frozen oracle literals
mod tests {
    use super::*;

    type B = BlochVector<f64>;

    fn deg(x: f64) -> f64 {
        x.to_radians()
    }

    // regression state used throughout: theta = 58 deg, phi = 249 deg
    const NX: f64 = -0.30391325733537439;
    const NY: f64 = -0.79172110329985601;
    const NZ: f64 = 0.5299192642332049;

    #[test]
    fn bloch_to_density_north_pole() {
        let rho = bloch_to_density(&B::new(0.0, 0.0, 1.0)).unwrap();
        assert!((rho.population(0) - 1.0).abs() < 1e-15);
        assert!((rho.population(1)).abs() < 1e-15);
    }

    #[test]
    fn bloch_to_density_x_eigenstate() {
        let rho = bloch_to_density(&B::new(1.0, 0.0, 0.0)).unwrap();
        let m = rho.matrix();
        for i in 0..2 {
            for j in 0..2 {
                assert!((m[(i, j)].re - 0.5).abs() < 1e-15);
                assert!(m[(i, j)].im.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn bloch_to_density_matches_outer_product_oracle() {
        // oracle: build |psi><psi| directly from the angle parametrization
        let angles = StateAngles::from_degrees(58.0, 249.0).unwrap();
        let psi = PureState::from_angles(angles);
        let oracle = psi.outer();

        let rho = bloch_to_density(&B::new(NX, NY, NZ)).unwrap();
        assert!(rho.matrix().max_abs_diff(&oracle).unwrap() < 1e-15);

        // frozen entries
        assert!((rho.matrix()[(0, 0)].re - 0.76495963211660245).abs() < 1e-15);
        assert!((rho.matrix()[(0, 1)].re - -0.15195662866768719).abs() < 1e-15);
        assert!((rho.matrix()[(0, 1)].im - 0.39586055164992801).abs() < 1e-15);
    }

    #[test]
    fn bloch_outside_sphere_rejected() {
        assert!(bloch_to_density(&B::new(0.8, 0.8, 0.8)).is_err());
    }

    #[test]
    fn density_to_bloch_trivial_cases() {
        let north = bloch_to_density(&B::new(0.0, 0.0, 1.0)).unwrap();
        let v = density_to_bloch(&north).unwrap();
        assert!(v.distance(&B::new(0.0, 0.0, 1.0)) < 1e-15);

        let mixed = DensityMatrix::<f64>::maximally_mixed(2);
        let v = density_to_bloch(&mixed).unwrap();
        assert!(v.norm() < 1e-15);
    }

    #[test]
    fn bloch_round_trip_regression_state() {
        let v = B::new(NX, NY, NZ);
        let back = density_to_bloch(&bloch_to_density(&v).unwrap()).unwrap();
        assert!(back.distance(&v) < 1e-12);
    }

    #[test]
    fn angles_to_bloch_examples() {
        let north = angles_to_bloch(StateAngles::<f64>::new(0.0, 1.234).unwrap());
        assert!(north.distance(&B::new(0.0, 0.0, 1.0)) < 1e-15);

        let eq = angles_to_bloch(StateAngles::<f64>::from_degrees(90.0, 45.0).unwrap());
        assert!((eq.nx - 0.70710678118654757).abs() < 1e-15);
        assert!((eq.ny - 0.70710678118654746).abs() < 1e-15);
        assert!(eq.nz.abs() < 1e-15);

        let reg = angles_to_bloch(StateAngles::from_degrees(58.0, 249.0).unwrap());
        assert!((reg.nx - NX).abs() < 1e-15);
        assert!((reg.ny - NY).abs() < 1e-15);
        assert!((reg.nz - NZ).abs() < 1e-15);
    }

    #[test]
    fn bloch_to_angles_inverse_and_poles() {
        let a = StateAngles::<f64>::from_degrees(58.0, 249.0).unwrap();
        let (back, undef) = bloch_to_angles(&angles_to_bloch(a)).unwrap();
        assert!(!undef);
        assert!((back.theta - a.theta).abs() < 1e-12);
        assert!((back.phi - a.phi).abs() < 1e-12);

        let (pole, undef) = bloch_to_angles(&B::new(0.0, 0.0, -1.0)).unwrap();
        assert!(undef);
        assert_eq!(pole.phi, 0.0);
        assert!((pole.theta - std::f64::consts::PI).abs() < 1e-15);

        assert!(bloch_to_angles(&B::new(0.3, 0.0, 0.0)).is_err());
    }

    #[test]
    fn fidelity_examples() {
        let reg = bloch_to_density(&B::new(NX, NY, NZ)).unwrap();
        assert!((fidelity(&reg, &reg).unwrap() - 1.0).abs() < 1e-12);

        let zero = bloch_to_density(&B::new(0.0, 0.0, 1.0)).unwrap();
        let one = bloch_to_density(&B::new(0.0, 0.0, -1.0)).unwrap();
        assert!(fidelity(&zero, &one).unwrap() < 1e-12);

        let plus = bloch_to_density(&B::new(1.0, 0.0, 0.0)).unwrap();
        assert!((fidelity(&zero, &plus).unwrap() - 0.5).abs() < 1e-12);

        let nine = DensityMatrix::<f64>::maximally_mixed(9);
        assert!(fidelity(&zero, &nine).is_err());
    }

    #[test]
    fn fidelity_unitary_invariance() {
        let a = bloch_to_density(&B::new(NX, NY, NZ)).unwrap();
        let b = bloch_to_density(&angles_to_bloch(StateAngles::from_degrees(137.0, 53.0).unwrap()))
            .unwrap();
        let f0 = fidelity(&a, &b).unwrap();
        // a handful of rotations about different axes
        for (axis, angle) in [(0.0, 0.7), (1.1, 2.3), (4.5, 3.9)] {
            let u = crate::gates::subspace_rotation::<f64>(2, 0, 1, axis, angle)
                .unwrap()
                .unitary_matrix()
                .unwrap()
                .clone();
            let ua = apply_unitary_density(&u, &a).unwrap();
            let ub = apply_unitary_density(&u, &b).unwrap();
            assert!((fidelity(&ua, &ub).unwrap() - f0).abs() < 1e-12);
        }
    }

    #[test]
    fn bloch_density_eigenvalues() {
        // eigenvalues of (I + v.s)/2 are (1 +/- |v|)/2
        let v = B::new(0.3, -0.2, 0.4);
        let rho = bloch_to_density(&v).unwrap();
        let ev = hermitian_eigenvalues(rho.matrix()).unwrap();
        let r = v.norm();
        assert!((ev[0] - (1.0 - r) / 2.0).abs() < 1e-10);
        assert!((ev[1] - (1.0 + r) / 2.0).abs() < 1e-10);
    }

    #[test]
    fn pauli_algebra() {
        // s_i s_j = delta_ij I + i eps_ijk s_k, all nine products
        let s = [pauli_x::<f64>(), pauli_y::<f64>(), pauli_z::<f64>()];
        let eye = ComplexMatrix::<f64>::identity(2);
        let eps = |i: usize, j: usize| -> Option<(usize, f64)> {
            match (i, j) {
                (0, 1) => Some((2, 1.0)),
                (1, 0) => Some((2, -1.0)),
                (1, 2) => Some((0, 1.0)),
                (2, 1) => Some((0, -1.0)),
                (2, 0) => Some((1, 1.0)),
                (0, 2) => Some((1, -1.0)),
                _ => None,
            }
        };
        for i in 0..3 {
            for j in 0..3 {
                let prod = s[i].mul(&s[j]).unwrap();
                let expected = if i == j {
                    eye.clone()
                } else {
                    let (k, sign) = eps(i, j).unwrap();
                    s[k].scale(C::new(0.0, sign))
                };
                assert!(
                    prod.max_abs_diff(&expected).unwrap() < 1e-15,
                    "pauli product {i}{j}"
                );
            }
        }
    }

    #[test]
    fn purity_and_apply() {
        assert!((DensityMatrix::<f64>::maximally_mixed(2).purity() - 0.5).abs() < 1e-15);

        let flipped = apply_unitary_state(&pauli_x::<f64>(), &PureState::basis(2, 0)).unwrap();
        assert!((flipped.population(1) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_density_matrices_rejected() {
        // trace != 1
        let m = ComplexMatrix::<f64>::identity(2);
        assert!(DensityMatrix::new(m).is_err());
        // non-Hermitian
        let mut m = ComplexMatrix::<f64>::identity(2).scale_re(0.5);
        m[(0, 1)] = C::new(0.3, 0.0);
        assert!(DensityMatrix::new(m).is_err());
        // negative eigenvalue: diag(1.5, -0.5)
        let mut m = ComplexMatrix::<f64>::zeros(2, 2);
        m[(0, 0)] = C::new(1.5, 0.0);
        m[(1, 1)] = C::new(-0.5, 0.0);
        assert!(DensityMatrix::new(m).is_err());
    }

    #[test]
    fn single_branch_theta_breaks_down() {
        // quadrant-aware path puts the north pole at theta = 0; the
        // single-branch form returns pi/2 there, and is off by pi/2 on
        // generic states.
        let north = B::new(0.0, 0.0, 1.0);
        assert!((single_branch::theta(&north) - std::f64::consts::FRAC_PI_2).abs() < 1e-15);

        let v = angles_to_bloch(StateAngles::from_degrees(60.0, 30.0).unwrap());
        let (prod, _) = bloch_to_angles(&v).unwrap();
        assert!((prod.theta - deg(60.0)).abs() < 1e-12);
        assert!((single_branch::theta(&v) - deg(150.0)).abs() < 1e-12);
    }

    #[test]
    fn single_branch_phi_agrees_off_axis() {
        for phi_deg in [30.0, 150.0, 200.0, 330.0, 95.0, 249.0] {
            let v = angles_to_bloch(StateAngles::<f64>::from_degrees(70.0, phi_deg).unwrap());
            let (prod, _) = bloch_to_angles(&v).unwrap();
            assert!(
                (single_branch::phi(&v) - prod.phi).abs() < 1e-12,
                "phi = {phi_deg}"
            );
        }
    }

    #[test]
    fn density_serde_schema() {
        let rho = bloch_to_density(&B::new(NX, NY, NZ)).unwrap();
        let json = serde_json::to_value(&rho).unwrap();
        assert_eq!(json["dim"], 2);
        assert!(json["re"].is_array() && json["im"].is_array());
        let back: DensityMatrix<f64> = serde_json::from_value(json).unwrap();
        assert!(back.matrix().max_abs_diff(rho.matrix()).unwrap() < 1e-12);

        let v = B::new(0.1, -0.2, 0.3);
        let json = serde_json::to_string(&v).unwrap();
        assert!(json.contains("\"nx\"") && json.contains("\"ny\"") && json.contains("\"nz\""));
    }

    #[test]
    fn f32_instantiation_works() {
        let v = BlochVector::<f32>::new(0.0, 0.0, 1.0);
        let rho = bloch_to_density(&v).unwrap();
        assert!((rho.population(0) - 1.0).abs() < 1e-6);
        let (a, undef) = bloch_to_angles(&v).unwrap();
        assert!(undef);
        assert_eq!(a.theta, 0.0);
    }
}
