//! Sequential-measurement reconstruction (method 2).
//!
//! Two weak impulsive couplings displace Gaussian pointer coordinates: the
//! A'-projectors pi_i^1, pi_j^2 shift x1, x2 and the middle-basis projectors
//! (pi_D^1, pi_D^2 by default) shift y1, y2. A strong projective measurement
//! pi_kl follows. Each matrix element is read off the expectation of the
//! product of the four per-coordinate lowering operators
//! a = x + i (2 sigma^2 / hbar) p, divided by g^4 and the fixed basis
//! overlaps.
//!
//! The joint state stays a finite sum of (basis ket, amplitude, displacement)
//! branches, so every moment reduces to a double sum over branch pairs of
//! closed-form one-dimensional Gaussian matrix elements.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{c64, projector, Aprime, Bprime, CMat, APRIME_ALL, C64};
use crate::modular::{projector_first, projector_second};
use crate::states::TwoPhotonDensityMatrix;

/// Simulation units: hbar = 1, so sigma_p = 1 / (2 sigma).
pub const HBAR: f64 = 1.0;

const AMP_PRUNE: f64 = 1e-14;

/// Pointer geometry shared by all four coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPointerConfig {
    pub g: f64,
    pub sigma: f64,
}

impl Default for GaussianPointerConfig {
    fn default() -> Self {
        Self {
            g: 1e-3,
            sigma: 1.0,
        }
    }
}

impl GaussianPointerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sigma <= 0.0 {
            return Err(Error::NonPhysicalInput(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if self.g < 0.0 {
            return Err(Error::NonPhysicalInput(format!(
                "g must be nonnegative, got {}",
                self.g
            )));
        }
        if self.g > self.sigma {
            return Err(Error::CouplingTooStrong {
                g: self.g,
                sigma: self.sigma,
            });
        }
        Ok(())
    }

    pub fn sigma_p(&self) -> f64 {
        HBAR / (2.0 * self.sigma)
    }

    /// Scale of the momentum part of the lowering operator, 2 sigma^2 / hbar.
    pub fn momentum_scale(&self) -> f64 {
        2.0 * self.sigma * self.sigma / HBAR
    }
}

/// The four pointer coordinates, ordered as stored in displacement vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coordinate {
    X1,
    Y1,
    X2,
    Y2,
}

pub const COORDINATES: [Coordinate; 4] = [
    Coordinate::X1,
    Coordinate::Y1,
    Coordinate::X2,
    Coordinate::Y2,
];

impl Coordinate {
    pub fn index(self) -> usize {
        match self {
            Coordinate::X1 => 0,
            Coordinate::Y1 => 1,
            Coordinate::X2 => 2,
            Coordinate::Y2 => 3,
        }
    }
}

/// One term |n> amp |G(d)> of the joint expansion; `index` is an A'-basis
/// index.
#[derive(Debug, Clone, Copy)]
pub struct Branch {
    pub index: usize,
    pub amp: C64,
    pub disp: [f64; 4],
}

/// One eigenbranch of the input density matrix, carried with its classical
/// weight.
#[derive(Debug, Clone)]
pub struct MixtureComponent {
    pub weight: f64,
    pub branches: Vec<Branch>,
}

/// Joint pointer + system state as a classical mixture of finite branch sums.
#[derive(Debug, Clone)]
pub struct GaussianBranchEnsemble {
    pub components: Vec<MixtureComponent>,
    pub sigma: f64,
}

fn merge_branches(branches: Vec<Branch>) -> Vec<Branch> {
    let mut merged: Vec<Branch> = Vec::with_capacity(branches.len());
    'outer: for b in branches {
        for m in &mut merged {
            if m.index == b.index && m.disp.map(f64::to_bits) == b.disp.map(f64::to_bits) {
                m.amp += b.amp;
                continue 'outer;
            }
        }
        merged.push(b);
    }
    merged.retain(|b| b.amp.norm() > AMP_PRUNE);
    merged
}

/// Initial product state: every eigenbranch of rho (weight above 1e-12)
/// becomes one mixture component with all pointer coordinates at zero
/// displacement.
pub fn prepare(
    rho: &TwoPhotonDensityMatrix,
    cfg: &GaussianPointerConfig,
) -> Result<GaussianBranchEnsemble> {
    cfg.validate()?;
    let mut components = Vec::new();
    for (weight, psi) in rho.eigen_branches() {
        let mut branches = Vec::new();
        for k in 0..4 {
            let amp = psi.amps()[k];
            if amp.norm() > AMP_PRUNE {
                branches.push(Branch {
                    index: k,
                    amp,
                    disp: [0.0; 4],
                });
            }
        }
        components.push(MixtureComponent { weight, branches });
    }
    Ok(GaussianBranchEnsemble {
        components,
        sigma: cfg.sigma,
    })
}

/// Impulsive weak coupling of a system projector to one pointer coordinate.
/// Each branch splits into the projected part (displaced by +g on `coord`)
/// and the complementary part (undisplaced); amplitudes redistribute by the
/// projector's matrix elements in the A' basis.
pub fn couple_weak(
    e: &GaussianBranchEnsemble,
    proj: &CMat,
    coord: Coordinate,
    g: f64,
) -> GaussianBranchEnsemble {
    let dim = proj.rows();
    let complement = CMat::identity(dim).sub(proj);
    let mut components = Vec::with_capacity(e.components.len());
    for comp in &e.components {
        let mut branches = Vec::new();
        for b in &comp.branches {
            for m in 0..dim {
                let hit = proj.get(m, b.index);
                if hit.norm() > 0.0 {
                    let mut disp = b.disp;
                    disp[coord.index()] += g;
                    branches.push(Branch {
                        index: m,
                        amp: b.amp * hit,
                        disp,
                    });
                }
                let miss = complement.get(m, b.index);
                if miss.norm() > 0.0 {
                    branches.push(Branch {
                        index: m,
                        amp: b.amp * miss,
                        disp: b.disp,
                    });
                }
            }
        }
        components.push(MixtureComponent {
            weight: comp.weight,
            branches: merge_branches(branches),
        });
    }
    GaussianBranchEnsemble {
        components,
        sigma: e.sigma,
    }
}

/// Which one-dimensional operator a Gaussian matrix element refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaussianKind {
    Unit,
    Position,
    Momentum,
}

/// Closed-form <G(d_bra)| O |G(d_ket)> between width-sigma Gaussians centered
/// at the two displacements:
///
/// * unit:     exp(-(d_bra - d_ket)^2 / (8 sigma^2))
/// * position: overlap * (d_bra + d_ket) / 2
/// * momentum: overlap * (i hbar / (4 sigma^2)) (d_bra - d_ket)
///
/// The momentum sign is pinned by a quadrature oracle in the tests and makes
/// the lowering combination x + i (2 sigma^2/hbar) p return the ket
/// displacement exactly. Hermitian symmetry <d|O|d'> = conj(<d'|O|d>) holds
/// for all three kinds.
pub fn gaussian_matrix_element(d_bra: f64, d_ket: f64, kind: GaussianKind, sigma: f64) -> C64 {
    let diff = d_bra - d_ket;
    let overlap = (-diff * diff / (8.0 * sigma * sigma)).exp();
    match kind {
        GaussianKind::Unit => c64(overlap, 0.0),
        GaussianKind::Position => c64(overlap * 0.5 * (d_bra + d_ket), 0.0),
        GaussianKind::Momentum => c64(
            0.0,
            overlap * HBAR / (4.0 * sigma * sigma) * (d_bra - d_ket),
        ),
    }
}

/// <G(d_bra)| x + i (2 sigma^2/hbar) p |G(d_ket)> = overlap * d_ket.
pub fn lowering_matrix_element(d_bra: f64, d_ket: f64, cfg: &GaussianPointerConfig) -> C64 {
    gaussian_matrix_element(d_bra, d_ket, GaussianKind::Position, cfg.sigma)
        + c64(0.0, cfg.momentum_scale())
            * gaussian_matrix_element(d_bra, d_ket, GaussianKind::Momentum, cfg.sigma)
}

/// Total norm of the joint state; unity after any sequence of couplings.
pub fn ensemble_norm(e: &GaussianBranchEnsemble) -> f64 {
    let mut total = 0.0;
    for comp in &e.components {
        let mut acc = C64::ZERO;
        for b in &comp.branches {
            for bp in &comp.branches {
                if b.index != bp.index {
                    continue;
                }
                let mut term = bp.amp.conj() * b.amp;
                for k in 0..4 {
                    term *=
                        gaussian_matrix_element(bp.disp[k], b.disp[k], GaussianKind::Unit, e.sigma);
                }
                acc += term;
            }
        }
        total += comp.weight * acc.re;
    }
    total
}

/// Pointer-only state after the strong pi_kl projection; per mixture
/// component a list of (scalar amplitude, displacement) pairs.
#[derive(Debug, Clone)]
pub struct PostselectedPointer {
    pub components: Vec<(f64, Vec<(C64, [f64; 4])>)>,
    pub sigma: f64,
}

pub fn postselect(e: &GaussianBranchEnsemble, kl: Aprime) -> PostselectedPointer {
    let target = kl.index();
    let components = e
        .components
        .iter()
        .map(|comp| {
            let mut pairs: Vec<(C64, [f64; 4])> = Vec::new();
            'outer: for b in comp.branches.iter().filter(|b| b.index == target) {
                for p in &mut pairs {
                    if p.1.map(f64::to_bits) == b.disp.map(f64::to_bits) {
                        p.0 += b.amp;
                        continue 'outer;
                    }
                }
                pairs.push((b.amp, b.disp));
            }
            (comp.weight, pairs)
        })
        .collect();
    PostselectedPointer {
        components,
        sigma: e.sigma,
    }
}

impl PostselectedPointer {
    /// Postselection success probability (the squared norm of the projected
    /// state). At g = 0 this is exactly Tr[pi_kl rho].
    pub fn mass(&self) -> f64 {
        let mut total = 0.0;
        for (weight, pairs) in &self.components {
            let mut acc = C64::ZERO;
            for (amp, disp) in pairs {
                for (amp_p, disp_p) in pairs {
                    let mut term = amp_p.conj() * amp;
                    for k in 0..4 {
                        term *= gaussian_matrix_element(
                            disp_p[k],
                            disp[k],
                            GaussianKind::Unit,
                            self.sigma,
                        );
                    }
                    acc += term;
                }
            }
            total += weight * acc.re;
        }
        total
    }

    /// Expectation of a product of one operator per coordinate on the
    /// unnormalized postselected state (trace form, no division by the
    /// postselection probability).
    pub fn coordinate_moment(&self, kinds: [GaussianKind; 4], cfg: &GaussianPointerConfig) -> C64 {
        let mut total = C64::ZERO;
        for (weight, pairs) in &self.components {
            let mut acc = C64::ZERO;
            for (amp, disp) in pairs {
                for (amp_p, disp_p) in pairs {
                    let mut term = amp_p.conj() * amp;
                    for k in 0..4 {
                        term *= gaussian_matrix_element(disp_p[k], disp[k], kinds[k], cfg.sigma);
                    }
                    acc += term;
                }
            }
            total += c64(*weight, 0.0) * acc;
        }
        total
    }

    /// Expectation of the product of the four lowering operators on the
    /// unnormalized postselected state.
    pub fn lowering_moment(&self, cfg: &GaussianPointerConfig) -> C64 {
        let mut total = C64::ZERO;
        for (weight, pairs) in &self.components {
            let mut acc = C64::ZERO;
            for (amp, disp) in pairs {
                for (amp_p, disp_p) in pairs {
                    let mut term = amp_p.conj() * amp;
                    for k in 0..4 {
                        term *= lowering_matrix_element(disp_p[k], disp[k], cfg);
                    }
                    acc += term;
                }
            }
            total += c64(*weight, 0.0) * acc;
        }
        total
    }
}

/// Applies the full coupling sequence for one A'-projector choice: pi_i^1 on
/// x1 and pi_j^2 on x2, then the middle projectors pi_alpha^1 on y1 and
/// pi_beta^2 on y2.
pub fn couple_for_setting(
    e: &GaussianBranchEnsemble,
    ij: Aprime,
    middle: Bprime,
    g: f64,
) -> GaussianBranchEnsemble {
    let (i, j) = ij.components();
    let (alpha, beta) = middle.components();
    let p_alpha = crate::hilbert::tensor(&projector(&alpha.ket()).unwrap(), &CMat::identity(2));
    let p_beta = crate::hilbert::tensor(&CMat::identity(2), &projector(&beta.ket()).unwrap());

    let e = couple_weak(e, &projector_first(i), Coordinate::X1, g);
    let e = couple_weak(&e, &projector_second(j), Coordinate::X2, g);
    let e = couple_weak(&e, &p_alpha, Coordinate::Y1, g);
    couple_weak(&e, &p_beta, Coordinate::Y2, g)
}

/// Trace-form weak average Tr[pi_kl (x) (a_y2 a_y1 a_x2 a_x1) rho_final],
/// evaluated as a double sum over branch pairs with per-coordinate
/// closed-form factors.
pub fn weak_average(e: &GaussianBranchEnsemble, kl: Aprime, cfg: &GaussianPointerConfig) -> C64 {
    postselect(e, kl).lowering_moment(cfg)
}

/// Full method-2 configuration: pointer geometry plus the fixed middle-basis
/// postselector (DD unless stated otherwise).
#[derive(Debug, Clone, Copy)]
pub struct Method2Config {
    pub pointer: GaussianPointerConfig,
    pub middle: Bprime,
}

impl Default for Method2Config {
    fn default() -> Self {
        Self {
            pointer: GaussianPointerConfig::default(),
            middle: Bprime::DD,
        }
    }
}

/// One matrix element: the lowering-product moment divided by g^4 and the
/// fixed overlaps <kl|ab><ab|ij>.
pub fn reconstruct_element(
    rho: &TwoPhotonDensityMatrix,
    ij: Aprime,
    kl: Aprime,
    cfg: &Method2Config,
) -> Result<C64> {
    cfg.pointer.validate()?;
    let e = prepare(rho, &cfg.pointer)?;
    let e = couple_for_setting(&e, ij, cfg.middle, cfg.pointer.g);
    let moment = weak_average(&e, kl, &cfg.pointer);
    let ab = cfg.middle.ket();
    let scale = kl.ket().inner(&ab).re * ab.inner(&ij.ket()).re;
    let g4 = cfg.pointer.g.powi(4);
    Ok(moment / c64(g4 * scale, 0.0))
}

/// All sixteen elements in the A' basis.
pub fn reconstruct(rho: &TwoPhotonDensityMatrix, cfg: &Method2Config) -> Result<CMat> {
    cfg.pointer.validate()?;
    let mut out = CMat::zeros(4, 4);
    for ij in APRIME_ALL {
        let e = prepare(rho, &cfg.pointer)?;
        let e = couple_for_setting(&e, ij, cfg.middle, cfg.pointer.g);
        for kl in APRIME_ALL {
            let moment = weak_average(&e, kl, &cfg.pointer);
            let ab = cfg.middle.ket();
            let scale = kl.ket().inner(&ab).re * ab.inner(&ij.ket()).re;
            out.set(
                ij.index(),
                kl.index(),
                moment / c64(cfg.pointer.g.powi(4) * scale, 0.0),
            );
        }
    }
    Ok(out)
}
