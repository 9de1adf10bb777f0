//! State construction (fixtures, seeded random pure/mixed states), the
//! brute-force density-matrix oracle, distance metrics, and the single-qubit
//! warm-up reconstruction.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{c64, eigh, Aprime, CMat, CVec, C64, NORM_TOL};

/// Smallest eigenvalue accepted on ingestion; anything in `[-EIG_TOL, 0)` is
/// clipped to zero, anything below is rejected.
pub const EIG_TOL: f64 = 1e-10;

/// Pure two-photon polarization state; amplitudes ordered HH, HV, VH, VV.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPhotonPureState {
    amps: [C64; 4],
}

impl TwoPhotonPureState {
    pub fn new(amps: [C64; 4]) -> Result<Self> {
        let norm = amps.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self { amps })
    }

    pub fn from_unnormalized(amps: [C64; 4]) -> Result<Self> {
        let norm = amps.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm < NORM_TOL {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self {
            amps: amps.map(|a| a / norm),
        })
    }

    pub fn amp(&self, ij: Aprime) -> C64 {
        self.amps[ij.index()]
    }

    pub fn amps(&self) -> &[C64; 4] {
        &self.amps
    }

    pub fn ket(&self) -> CVec {
        CVec::new(self.amps.to_vec())
    }

    /// Global phase rotated so the largest amplitude is real positive.
    pub fn phase_canonical(&self) -> Self {
        let k = self.ket().phase_canonical();
        let mut amps = [C64::ZERO; 4];
        for (i, a) in amps.iter_mut().enumerate() {
            *a = k.get(i);
        }
        Self { amps }
    }
}

/// 4x4 Hermitian, positive-semidefinite, unit-trace matrix in the A' basis.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPhotonDensityMatrix {
    m: CMat,
}

impl TwoPhotonDensityMatrix {
    /// Validates physicality. Eigenvalues in `[-1e-10, 0)` are clipped to
    /// zero and the trace renormalized, so JSON round-trips survive rounding.
    pub fn new(m: CMat) -> Result<Self> {
        if m.rows() != 4 || m.cols() != 4 {
            return Err(Error::NonPhysicalInput("matrix must be 4x4".into()));
        }
        if !m.is_hermitian(NORM_TOL) {
            return Err(Error::NonPhysicalInput("matrix is not Hermitian".into()));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > NORM_TOL || tr.im.abs() > NORM_TOL {
            return Err(Error::NonPhysicalInput(format!(
                "trace is {tr}, expected 1"
            )));
        }

        let (vals, vecs) = eigh(&m);
        if vals.iter().any(|&v| v < -EIG_TOL) {
            return Err(Error::NonPhysicalInput(format!(
                "negative eigenvalue {:.3e}",
                vals.iter().cloned().fold(f64::INFINITY, f64::min)
            )));
        }
        if vals.iter().all(|&v| v >= 0.0) {
            return Ok(Self { m });
        }

        // Clip the slightly negative tail and renormalize.
        let clipped: Vec<f64> = vals.iter().map(|&v| v.max(0.0)).collect();
        let total: f64 = clipped.iter().sum();
        let mut out = CMat::zeros(4, 4);
        for (v, vec) in clipped.iter().zip(&vecs) {
            out = out.add(&vec.outer(vec).scale(c64(v / total, 0.0)));
        }
        Ok(Self { m: out })
    }

    pub fn matrix(&self) -> &CMat {
        &self.m
    }

    pub fn element(&self, ij: Aprime, kl: Aprime) -> C64 {
        self.m.get(ij.index(), kl.index())
    }

    /// Spectral decomposition restricted to eigenvalues above 1e-12.
    pub fn eigen_branches(&self) -> Vec<(f64, TwoPhotonPureState)> {
        let (vals, vecs) = eigh(&self.m);
        let mut out = Vec::new();
        for (v, vec) in vals.iter().zip(&vecs).rev() {
            if *v > 1e-12 {
                let mut amps = [C64::ZERO; 4];
                for (i, a) in amps.iter_mut().enumerate() {
                    *a = vec.get(i);
                }
                out.push((*v, TwoPhotonPureState { amps }));
            }
        }
        out
    }

    pub fn maximally_mixed() -> Self {
        Self {
            m: CMat::identity(4).scale(c64(0.25, 0.0)),
        }
    }
}

/// Oracle: rho_{ij,kl} = C_ij * conj(C_kl).
pub fn density_from_pure(s: &TwoPhotonPureState) -> TwoPhotonDensityMatrix {
    TwoPhotonDensityMatrix {
        m: s.ket().outer(&s.ket()),
    }
}

pub fn bell_phi_plus() -> TwoPhotonPureState {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    TwoPhotonPureState::new([c64(r, 0.0), C64::ZERO, C64::ZERO, c64(r, 0.0)]).unwrap()
}

pub fn bell_phi_minus() -> TwoPhotonPureState {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    TwoPhotonPureState::new([c64(r, 0.0), C64::ZERO, C64::ZERO, c64(-r, 0.0)]).unwrap()
}

pub fn bell_psi_plus() -> TwoPhotonPureState {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    TwoPhotonPureState::new([C64::ZERO, c64(r, 0.0), c64(r, 0.0), C64::ZERO]).unwrap()
}

pub fn bell_psi_minus() -> TwoPhotonPureState {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    TwoPhotonPureState::new([C64::ZERO, c64(r, 0.0), c64(-r, 0.0), C64::ZERO]).unwrap()
}

pub fn product_hh() -> TwoPhotonPureState {
    TwoPhotonPureState::new([C64::ONE, C64::ZERO, C64::ZERO, C64::ZERO]).unwrap()
}

pub fn product_dd() -> TwoPhotonPureState {
    TwoPhotonPureState::new([c64(0.5, 0.0); 4]).unwrap()
}

/// werner(p) = p |Phi+><Phi+| + (1-p) I/4.
pub fn werner(p: f64) -> Result<TwoPhotonDensityMatrix> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidStateSpec(format!(
            "werner parameter {p} outside [0,1]"
        )));
    }
    let bell = density_from_pure(&bell_phi_plus());
    let m = bell
        .matrix()
        .scale(c64(p, 0.0))
        .add(&CMat::identity(4).scale(c64((1.0 - p) / 4.0, 0.0)));
    TwoPhotonDensityMatrix::new(m)
}

/// Haar-style random pure state: four standard complex Gaussians, normalized.
/// Deterministic per seed.
pub fn random_pure(seed: u64) -> TwoPhotonPureState {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    random_pure_with(&mut rng)
}

fn random_pure_with(rng: &mut ChaCha12Rng) -> TwoPhotonPureState {
    let mut amps = [C64::ZERO; 4];
    for a in &mut amps {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        *a = c64(re, im);
    }
    TwoPhotonPureState::from_unnormalized(amps).expect("Gaussian draw is nonzero")
}

/// Convex combination of `rank` random pure projectors with Dirichlet-uniform
/// weights. Deterministic per seed.
pub fn random_mixed(seed: u64, rank: u32) -> Result<TwoPhotonDensityMatrix> {
    if !(1..=4).contains(&rank) {
        return Err(Error::InvalidRank(rank));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut weights = Vec::with_capacity(rank as usize);
    for _ in 0..rank {
        let w: f64 = Exp1.sample(&mut rng);
        weights.push(w);
    }
    let total: f64 = weights.iter().sum();

    let mut m = CMat::zeros(4, 4);
    for w in weights {
        let psi = random_pure_with(&mut rng);
        m = m.add(&psi.ket().outer(&psi.ket()).scale(c64(w / total, 0.0)));
    }
    TwoPhotonDensityMatrix::new(m)
}

fn sqrt_psd(m: &CMat) -> CMat {
    let (vals, vecs) = eigh(m);
    let mut out = CMat::zeros(m.rows(), m.cols());
    for (v, vec) in vals.iter().zip(&vecs) {
        if *v > 0.0 {
            out = out.add(&vec.outer(vec).scale(c64(v.sqrt(), 0.0)));
        }
    }
    out
}

/// Uhlmann fidelity (Tr sqrt(sqrt(a) b sqrt(a)))^2.
pub fn fidelity(a: &TwoPhotonDensityMatrix, b: &TwoPhotonDensityMatrix) -> f64 {
    let ra = sqrt_psd(a.matrix());
    let inner = ra.mul(b.matrix()).mul(&ra);
    // inner is PSD up to rounding; clip before the square root.
    let (vals, _) = eigh(&inner.add(&inner.adjoint()).scale(c64(0.5, 0.0)));
    let tr: f64 = vals.iter().map(|&v| v.max(0.0).sqrt()).sum();
    (tr * tr).min(1.0)
}

/// Trace distance (1/2) Tr |a - b|.
pub fn trace_distance(a: &TwoPhotonDensityMatrix, b: &TwoPhotonDensityMatrix) -> f64 {
    let (vals, _) = eigh(&a.matrix().sub(b.matrix()));
    0.5 * vals.iter().map(|v| v.abs()).sum::<f64>()
}

/// Single-qubit direct reconstruction: recovers |psi> (up to global phase)
/// from the weak values of the basis projectors with postselection |alpha>.
pub fn reconstruct_pure_qubit(psi: &CVec, alpha: &CVec) -> Result<CVec> {
    assert_eq!(psi.dim(), 2);
    assert_eq!(alpha.dim(), 2);
    let denom = alpha.inner(psi);
    if denom.norm() < NORM_TOL {
        return Err(Error::OrthogonalPostselection);
    }

    let mut amps = Vec::with_capacity(2);
    for k in 0..2 {
        let basis_ket = CVec::basis(2, k);
        let w = alpha.inner(&basis_ket) * basis_ket.inner(psi) / denom;
        let a_k = alpha.inner(&basis_ket);
        if a_k.norm() < NORM_TOL {
            return Err(Error::OrthogonalPostselection);
        }
        // nu_k * w_k = c_k; the common factor <alpha|psi> drops on normalization.
        amps.push(w / a_k);
    }
    Ok(CVec::new(amps).normalized().phase_canonical())
}

/// Declarative state description; the JSON form is the CLI's `--state` input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum StateSpec {
    #[serde(rename = "pure")]
    Pure { amps: [[f64; 2]; 4] },
    #[serde(rename = "mixed")]
    Mixed { matrix: [[[f64; 2]; 4]; 4] },
    #[serde(rename = "fixture")]
    Fixture { name: String },
    #[serde(rename = "random-pure")]
    RandomPure { seed: u64 },
    #[serde(rename = "random-mixed")]
    RandomMixed { seed: u64, rank: u32 },
}

/// A state ready for the pipelines: always a density matrix, with the pure
/// amplitudes kept alongside when the description was pure.
#[derive(Debug, Clone)]
pub struct RealizedState {
    pub rho: TwoPhotonDensityMatrix,
    pub pure: Option<TwoPhotonPureState>,
}

impl RealizedState {
    pub fn from_pure(s: TwoPhotonPureState) -> Self {
        Self {
            rho: density_from_pure(&s),
            pure: Some(s),
        }
    }

    pub fn from_mixed(rho: TwoPhotonDensityMatrix) -> Self {
        Self { rho, pure: None }
    }
}

pub fn fixture(name: &str) -> Result<RealizedState> {
    if let Some(arg) = name
        .strip_prefix("werner(")
        .and_then(|s| s.strip_suffix(')'))
    {
        let p: f64 = arg
            .parse()
            .map_err(|_| Error::UnknownFixture(name.to_string()))?;
        return Ok(RealizedState::from_mixed(werner(p)?));
    }
    let pure = match name {
        "bell-phi-plus" => bell_phi_plus(),
        "bell-phi-minus" => bell_phi_minus(),
        "bell-psi-plus" => bell_psi_plus(),
        "bell-psi-minus" => bell_psi_minus(),
        "product-HH" => product_hh(),
        "product-DD" => product_dd(),
        _ => return Err(Error::UnknownFixture(name.to_string())),
    };
    Ok(RealizedState::from_pure(pure))
}

impl StateSpec {
    pub fn parse_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidStateSpec(e.to_string()))
    }

    pub fn realize(&self) -> Result<RealizedState> {
        match self {
            StateSpec::Pure { amps } => {
                let amps = amps.map(|[re, im]| c64(re, im));
                Ok(RealizedState::from_pure(TwoPhotonPureState::new(amps)?))
            }
            StateSpec::Mixed { matrix } => {
                let mut m = CMat::zeros(4, 4);
                for (r, row) in matrix.iter().enumerate() {
                    for (c, &[re, im]) in row.iter().enumerate() {
                        m.set(r, c, c64(re, im));
                    }
                }
                Ok(RealizedState::from_mixed(TwoPhotonDensityMatrix::new(m)?))
            }
            StateSpec::Fixture { name } => fixture(name),
            StateSpec::RandomPure { seed } => Ok(RealizedState::from_pure(random_pure(*seed))),
            StateSpec::RandomMixed { seed, rank } => {
                Ok(RealizedState::from_mixed(random_mixed(*seed, *rank)?))
            }
        }
    }
}
