//! Postselected-measurement reconstruction (method 1).
//!
//! The pipeline turns a two-photon state, a coupling strength g and a path
//! pointer (mu, eta) into, per (A'-projector, B'-postselection) setting:
//! three modular values, the corresponding postselected pointer states,
//! analyzer readout probabilities, and finally the joint weak value that the
//! assembly identities consume to produce every density-matrix element in
//! either basis.
//!
//! Exactness hinges on two identities that hold at any coupling strength:
//! the modular value of a projector equals `1 + s * (weak value)` with
//! `s = exp(-ig) - 1`, and the joint weak value is recovered from the three
//! modular values as `s^-2 (m_sum - m_1 - m_2 + 1)`.

use crate::error::{Error, Result};
use crate::hilbert::{
    c64, overlap_b_a, projector, tensor, Aprime, Bprime, CMat, CVec, Pol, APRIME_ALL, BPRIME_ALL,
    C64,
};
use crate::states::{RealizedState, TwoPhotonDensityMatrix, TwoPhotonPureState};

/// Postselection probabilities at or below this are treated as dead.
pub const POSTSELECTION_TOL: f64 = 1e-12;
/// |s| at or below this makes the modular-to-weak inversion singular.
pub const COUPLING_TOL: f64 = 1e-9;

/// Coupling strength g with the derived factor s = e^(-ig) - 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupling {
    g: f64,
    s: C64,
}

impl Coupling {
    pub fn new(g: f64) -> Self {
        Self {
            g,
            s: C64::from_polar(1.0, -g) - C64::ONE,
        }
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn s(&self) -> C64 {
        self.s
    }

    /// True when g is (numerically) a multiple of 2 pi and s vanishes.
    pub fn is_degenerate(&self) -> bool {
        self.s.norm() <= COUPLING_TOL
    }
}

/// Two-mode path pointer mu|up,down> + eta|down,up>.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathPointerState {
    mu: C64,
    eta: C64,
}

impl PathPointerState {
    pub fn new(mu: C64, eta: C64) -> Result<Self> {
        let norm = (mu.norm_sqr() + eta.norm_sqr()).sqrt();
        if (norm - 1.0).abs() > crate::hilbert::NORM_TOL {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self { mu, eta })
    }

    /// Real nonnegative eta with mu = sqrt(1 - eta^2), the form every
    /// estimator assumes.
    pub fn from_eta(eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::NotNormalized { norm: eta });
        }
        Ok(Self {
            mu: c64((1.0 - eta * eta).sqrt(), 0.0),
            eta: c64(eta, 0.0),
        })
    }

    pub fn mu(&self) -> C64 {
        self.mu
    }

    pub fn eta(&self) -> C64 {
        self.eta
    }
}

/// Which of the three pointer interactions a quantity refers to: the joint
/// sum projector, the first-photon projector, or the second-photon projector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModularTarget {
    Sum,
    First,
    Second,
}

pub const MODULAR_TARGETS: [ModularTarget; 3] = [
    ModularTarget::Sum,
    ModularTarget::First,
    ModularTarget::Second,
];

/// The modular-value triple for one (ij, ab) setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModularValueSet {
    pub m_sum: C64,
    pub m_first: C64,
    pub m_second: C64,
}

impl ModularValueSet {
    pub fn get(&self, target: ModularTarget) -> C64 {
        match target {
            ModularTarget::Sum => self.m_sum,
            ModularTarget::First => self.m_first,
            ModularTarget::Second => self.m_second,
        }
    }
}

/// Conditional analyzer probabilities (p_re, p_im) for the three
/// interactions; six numbers per setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadoutProbabilities {
    pub sum: (f64, f64),
    pub first: (f64, f64),
    pub second: (f64, f64),
}

impl ReadoutProbabilities {
    pub fn get(&self, target: ModularTarget) -> (f64, f64) {
        match target {
            ModularTarget::Sum => self.sum,
            ModularTarget::First => self.first,
            ModularTarget::Second => self.second,
        }
    }
}

/// pi_i acting on the first photon: |i><i| (x) I.
pub fn projector_first(i: Pol) -> CMat {
    tensor(&projector(&i.ket()).unwrap(), &CMat::identity(2))
}

/// pi_j acting on the second photon: I (x) |j><j|.
pub fn projector_second(j: Pol) -> CMat {
    tensor(&CMat::identity(2), &projector(&j.ket()).unwrap())
}

/// Joint projector |ij><ij|.
pub fn projector_joint(ij: Aprime) -> CMat {
    projector(&ij.ket()).unwrap()
}

/// Probability of postselecting |ab> on rho.
pub fn postselection_probability(rho: &TwoPhotonDensityMatrix, ab: Bprime) -> f64 {
    let k = ab.ket();
    rho.matrix().sandwich(&k, &k).re
}

/// Weak value <ab|Op rho|ab> / <ab|rho|ab> of an arbitrary operator.
pub fn weak_value_of(rho: &TwoPhotonDensityMatrix, op: &CMat, ab: Bprime) -> Result<C64> {
    let k = ab.ket();
    let p = rho.matrix().sandwich(&k, &k).re;
    if p <= POSTSELECTION_TOL {
        return Err(Error::OrthogonalPostselection);
    }
    Ok(op.mul(rho.matrix()).sandwich(&k, &k) / p)
}

/// Weak value of the joint projector pi_i pi_j under rho with postselection
/// |ab>.
pub fn weak_value_joint(rho: &TwoPhotonDensityMatrix, ij: Aprime, ab: Bprime) -> Result<C64> {
    weak_value_of(rho, &projector_joint(ij), ab)
}

/// Modular values of pi_i^1, pi_j^2 and pi_i^1 + pi_j^2 for one setting.
///
/// Uses the factorized form of the sum evolution,
/// `exp(-ig(pi1 + pi2)) = (1 + s pi1)(1 + s pi2)`, which is where the
/// s^2-weighted joint weak value enters.
pub fn modular_value(
    rho: &TwoPhotonDensityMatrix,
    ij: Aprime,
    ab: Bprime,
    coupling: Coupling,
) -> Result<ModularValueSet> {
    let (i, j) = ij.components();
    let w1 = weak_value_of(rho, &projector_first(i), ab)?;
    let w2 = weak_value_of(rho, &projector_second(j), ab)?;
    let wj = weak_value_joint(rho, ij, ab)?;
    let s = coupling.s();
    Ok(ModularValueSet {
        m_sum: C64::ONE + s * (w1 + w2) + s * s * wj,
        m_first: C64::ONE + s * w1,
        m_second: C64::ONE + s * w2,
    })
}

/// Inverts a modular-value triple to the joint weak value,
/// `w = s^-2 (m_sum - m_1 - m_2 + 1)`. Exact at any g with |s| above
/// tolerance; no weak-coupling approximation is involved.
pub fn modular_to_weak(mv: &ModularValueSet, coupling: Coupling) -> Result<C64> {
    if coupling.is_degenerate() {
        return Err(Error::DegenerateCoupling { g: coupling.g() });
    }
    let s2 = coupling.s() * coupling.s();
    Ok((mv.m_sum - mv.m_first - mv.m_second + C64::ONE) / s2)
}

fn interaction_factor(target: ModularTarget, ij: Aprime, coupling: Coupling) -> CMat {
    // exp(-ig pi) = 1 + s pi for a projector pi.
    let (i, j) = ij.components();
    let s = coupling.s();
    let e1 = CMat::identity(4).add(&projector_first(i).scale(s));
    let e2 = CMat::identity(4).add(&projector_second(j).scale(s));
    match target {
        ModularTarget::Sum => e1.mul(&e2),
        ModularTarget::First => e1,
        ModularTarget::Second => e2,
    }
}

/// Evolves pointer (x) |psi> under the selected interaction, postselects
/// the polarization onto |ab>, and returns the normalized two-mode pointer
/// state, ordered [ |up,down>, |down,up> ].
///
/// Only the |down,up> path component picks up the system evolution, so the
/// result is N [ mu |up,down> + eta m |down,up> ] with m the corresponding
/// modular value.
pub fn evolve_and_postselect(
    psi: &TwoPhotonPureState,
    pointer: &PathPointerState,
    coupling: Coupling,
    ij: Aprime,
    ab: Bprime,
    target: ModularTarget,
) -> Result<CVec> {
    let ab_ket = ab.ket();
    let denom = ab_ket.inner(&psi.ket());
    if denom.norm() <= POSTSELECTION_TOL {
        return Err(Error::OrthogonalPostselection);
    }
    let evolved = interaction_factor(target, ij, coupling).mul_vec(&psi.ket());
    let m = ab_ket.inner(&evolved) / denom;
    let out = CVec::new(vec![pointer.mu(), pointer.eta() * m]);
    if out.norm() <= POSTSELECTION_TOL {
        // Only reachable with mu = 0 and a vanishing modular value: the
        // postselected pointer state is the zero vector.
        return Err(Error::DegeneratePointer);
    }
    Ok(out.normalized())
}

/// Analyzer probabilities of a normalized pointer state against
/// phi_re = (|ud> + |du>)/sqrt(2) and phi_im = (|ud> + i|du>)/sqrt(2).
pub fn readout_probabilities(pointer_final: &CVec) -> (f64, f64) {
    assert_eq!(pointer_final.dim(), 2);
    let c0 = pointer_final.get(0);
    let c1 = pointer_final.get(1);
    let amp_re = (c0 + c1) * c64(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let amp_im = (c0 - c64(0.0, 1.0) * c1) * c64(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    (amp_re.norm_sqr(), amp_im.norm_sqr())
}

/// How a modular value is recovered from its probability pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorMode {
    /// m ~ (mu/eta) [ (p_re - 1/2) + i (p_im - 1/2) ]; bias vanishes as
    /// eta -> 0.
    FirstOrder,
    /// Exact inversion of the normalized-readout map; unbiased for pure
    /// preselection at any eta below the invertibility bound.
    ExactInversion,
}

/// Recovers a modular value from its analyzer probability pair.
pub fn estimate_modular_from_probabilities(
    p_re: f64,
    p_im: f64,
    mu: f64,
    eta: f64,
    mode: EstimatorMode,
) -> Result<C64> {
    if eta <= 0.0 {
        return Err(Error::DegeneratePointer);
    }
    let a = p_re - 0.5;
    let b = p_im - 0.5;
    match mode {
        EstimatorMode::FirstOrder => Ok(c64(a, b) * (mu / eta)),
        EstimatorMode::ExactInversion => {
            let csq = a * a + b * b;
            if csq < 1e-30 {
                return Ok(C64::ZERO);
            }
            let disc = 1.0 - 4.0 * csq;
            if disc <= 0.0 {
                return Err(Error::InversionOutOfRange);
            }
            // r = |eta m / mu|^2 solves r = c (1+r)^2; the two roots are
            // reciprocal, and the branch continuous at c -> 0 is the small one.
            let r = ((1.0 - 2.0 * csq) - disc.sqrt()) / (2.0 * csq);
            Ok(c64(a, b) * ((mu / eta) * (1.0 + r)))
        }
    }
}

/// Exact conditional analyzer probabilities for one setting, mixing the
/// postselected pointer over the eigenbranches of rho.
#[derive(Debug, Clone, Copy)]
pub struct SettingReadout {
    pub p_ab: f64,
    pub probs: ReadoutProbabilities,
}

/// Computes the six analyzer probabilities and the postselection probability
/// for one (ij, ab) setting. Returns `None` when the postselection is dead.
pub fn setting_readout(
    rho: &TwoPhotonDensityMatrix,
    pointer: &PathPointerState,
    coupling: Coupling,
    ij: Aprime,
    ab: Bprime,
) -> Option<SettingReadout> {
    let p_ab = postselection_probability(rho, ab);
    if p_ab <= POSTSELECTION_TOL {
        return None;
    }
    let ab_ket = ab.ket();
    let branches = rho.eigen_branches();

    let mut per_target = [(0.0, 0.0); 3];
    for (slot, target) in MODULAR_TARGETS.iter().enumerate() {
        let factor = interaction_factor(*target, ij, coupling);
        let mut num_re = 0.0;
        let mut num_im = 0.0;
        let mut den = 0.0;
        for (weight, psi) in &branches {
            let z = ab_ket.inner(&psi.ket());
            let m = if z.norm() <= POSTSELECTION_TOL {
                // This eigenbranch never survives postselection; it
                // contributes nothing to either numerator or denominator.
                continue;
            } else {
                ab_ket.inner(&factor.mul_vec(&psi.ket())) / z
            };
            let unnorm = CVec::new(vec![pointer.mu() * z, pointer.eta() * m * z]);
            let c0 = unnorm.get(0);
            let c1 = unnorm.get(1);
            let amp_re = (c0 + c1) * c64(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            let amp_im = (c0 - c64(0.0, 1.0) * c1) * c64(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            num_re += weight * amp_re.norm_sqr();
            num_im += weight * amp_im.norm_sqr();
            den += weight * (c0.norm_sqr() + c1.norm_sqr());
        }
        if den <= POSTSELECTION_TOL {
            // mu = 0 with vanishing modular values leaves no pointer state to
            // analyze; treat the setting as dead.
            return None;
        }
        per_target[slot] = (num_re / den, num_im / den);
    }

    Some(SettingReadout {
        p_ab,
        probs: ReadoutProbabilities {
            sum: per_target[0],
            first: per_target[1],
            second: per_target[2],
        },
    })
}

/// Joint weak values w(ij | ab) and postselection probabilities for all 16
/// settings; the input both assembly identities consume. `None` marks a dead
/// postselection.
#[derive(Debug, Clone)]
pub struct WeakValueTable {
    /// Indexed by Bprime.
    pub p: [f64; 4],
    /// w[ij][ab], indexed by Aprime then Bprime.
    pub w: [[Option<C64>; 4]; 4],
}

/// Exact table via the modular-value route (the identity inversion).
pub fn weak_table_exact(
    rho: &TwoPhotonDensityMatrix,
    coupling: Coupling,
) -> Result<WeakValueTable> {
    if coupling.is_degenerate() {
        return Err(Error::DegenerateCoupling { g: coupling.g() });
    }
    let mut table = WeakValueTable {
        p: [0.0; 4],
        w: [[None; 4]; 4],
    };
    for ab in BPRIME_ALL {
        table.p[ab.index()] = postselection_probability(rho, ab);
    }
    for ij in APRIME_ALL {
        for ab in BPRIME_ALL {
            if table.p[ab.index()] > POSTSELECTION_TOL {
                let mv = modular_value(rho, ij, ab, coupling)?;
                table.w[ij.index()][ab.index()] = Some(modular_to_weak(&mv, coupling)?);
            }
        }
    }
    Ok(table)
}

/// Table via the full pointer pipeline with exact (noiseless) analyzer
/// probabilities: evolve, postselect, read out, estimate modular values,
/// invert.
pub fn weak_table_probability(
    rho: &TwoPhotonDensityMatrix,
    pointer: &PathPointerState,
    coupling: Coupling,
    estimator: EstimatorMode,
) -> Result<WeakValueTable> {
    if coupling.is_degenerate() {
        return Err(Error::DegenerateCoupling { g: coupling.g() });
    }
    let mu = pointer.mu().norm();
    let eta = pointer.eta().norm();
    let mut table = WeakValueTable {
        p: [0.0; 4],
        w: [[None; 4]; 4],
    };
    for ij in APRIME_ALL {
        for ab in BPRIME_ALL {
            let Some(readout) = setting_readout(rho, pointer, coupling, ij, ab) else {
                continue;
            };
            table.p[ab.index()] = readout.p_ab;
            let mut est = [C64::ZERO; 3];
            for (slot, target) in MODULAR_TARGETS.iter().enumerate() {
                let (p_re, p_im) = readout.probs.get(*target);
                est[slot] = estimate_modular_from_probabilities(p_re, p_im, mu, eta, estimator)?;
            }
            let mv = ModularValueSet {
                m_sum: est[0],
                m_first: est[1],
                m_second: est[2],
            };
            table.w[ij.index()][ab.index()] = Some(modular_to_weak(&mv, coupling)?);
        }
    }
    Ok(table)
}

/// A'-basis element rho_{ij,kl} from the table. Dead-postselection terms
/// carry weight p * w, which vanishes for physical states, so they are
/// dropped rather than divided out.
pub fn assemble_element_aprime(table: &WeakValueTable, ij: Aprime, kl: Aprime) -> C64 {
    let mut acc = C64::ZERO;
    for ab in BPRIME_ALL {
        let p = table.p[ab.index()];
        if p <= POSTSELECTION_TOL {
            continue;
        }
        if let Some(w) = table.w[ij.index()][ab.index()] {
            let ratio = overlap_b_a(ab, kl) / overlap_b_a(ab, ij);
            acc += c64(p, 0.0) * ratio * w;
        }
    }
    acc
}

/// B'-basis element rho_{ab,a'b'} from the table; the postselection a'b' is
/// fixed for the whole element, so a dead column is unavailable (`None`).
pub fn assemble_element_bprime(table: &WeakValueTable, row: Bprime, col: Bprime) -> Option<C64> {
    if table.p[col.index()] <= POSTSELECTION_TOL {
        return None;
    }
    let mut acc = C64::ZERO;
    for ij in APRIME_ALL {
        let w = table.w[ij.index()][col.index()]?;
        let ratio = overlap_b_a(row, ij) / overlap_b_a(col, ij);
        acc += c64(table.p[col.index()], 0.0) * ratio * w;
    }
    Some(acc)
}

/// Which basis the reconstructed elements target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetBasis {
    Aprime,
    Bprime,
}

impl TargetBasis {
    pub fn label(self) -> &'static str {
        match self {
            TargetBasis::Aprime => "aprime",
            TargetBasis::Bprime => "bprime",
        }
    }

    pub fn row_label(self, k: usize) -> &'static str {
        match self {
            TargetBasis::Aprime => Aprime::from_index(k).label(),
            TargetBasis::Bprime => Bprime::from_index(k).label(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method1Mode {
    Exact,
    Probability,
}

impl Method1Mode {
    pub fn label(self) -> &'static str {
        match self {
            Method1Mode::Exact => "exact",
            Method1Mode::Probability => "probability",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Method1Config {
    pub mode: Method1Mode,
    pub basis: TargetBasis,
    pub coupling: Coupling,
    pub eta: f64,
    pub estimator: EstimatorMode,
}

impl Method1Config {
    pub fn exact() -> Self {
        Self {
            mode: Method1Mode::Exact,
            basis: TargetBasis::Aprime,
            coupling: Coupling::new(std::f64::consts::FRAC_PI_2),
            eta: 1e-2,
            estimator: EstimatorMode::ExactInversion,
        }
    }
}

/// Raw reconstruction result, before physicality projection.
#[derive(Debug, Clone)]
pub struct Method1Outcome {
    pub basis: TargetBasis,
    /// Target-basis elements; `None` marks an omitted element.
    pub elements: [[Option<C64>; 4]; 4],
    /// "ROW,COL" labels of omitted elements, row-major order.
    pub omitted: Vec<String>,
    /// A'-basis representation of the estimate (omitted elements enter as 0,
    /// which is their exact value for physical states).
    pub rho_raw: CMat,
    /// Postselection probabilities used by the assembly, indexed by Bprime.
    pub p_post: [f64; 4],
}

/// Assembles the full element matrix in the target basis from a weak-value
/// table.
///
/// In exact mode a dead postselection column carries the finite direct value
/// p * w = <ab|pi_ij rho|ab> * ratio, which vanishes identically for physical
/// states, so `fill_dead_with_zero` records the zero instead of omitting. The
/// probability pipeline cannot reach those elements and reports them as
/// unavailable.
pub fn assemble_outcome(
    table: &WeakValueTable,
    basis: TargetBasis,
    fill_dead_with_zero: bool,
) -> Method1Outcome {
    let mut elements = [[None; 4]; 4];
    let mut omitted = Vec::new();
    match basis {
        TargetBasis::Aprime => {
            for ij in APRIME_ALL {
                for kl in APRIME_ALL {
                    elements[ij.index()][kl.index()] = Some(assemble_element_aprime(table, ij, kl));
                }
            }
        }
        TargetBasis::Bprime => {
            for row in BPRIME_ALL {
                for col in BPRIME_ALL {
                    let mut el = assemble_element_bprime(table, row, col);
                    if el.is_none() && fill_dead_with_zero {
                        el = Some(C64::ZERO);
                    }
                    if el.is_none() {
                        omitted.push(format!("{},{}", row.label(), col.label()));
                    }
                    elements[row.index()][col.index()] = el;
                }
            }
        }
    }

    let rho_raw = match basis {
        TargetBasis::Aprime => {
            let mut m = CMat::zeros(4, 4);
            for r in 0..4 {
                for c in 0..4 {
                    m.set(r, c, elements[r][c].unwrap_or(C64::ZERO));
                }
            }
            m
        }
        TargetBasis::Bprime => {
            // rho = sum elements * |row><col| expanded over the A' basis.
            let mut m = CMat::zeros(4, 4);
            for row in BPRIME_ALL {
                for col in BPRIME_ALL {
                    if let Some(el) = elements[row.index()][col.index()] {
                        m = m.add(&row.ket().outer(&col.ket()).scale(el));
                    }
                }
            }
            m
        }
    };

    Method1Outcome {
        basis,
        elements,
        omitted,
        rho_raw,
        p_post: table.p,
    }
}

/// Full method-1 reconstruction with exact algebra or with the deterministic
/// probability pipeline. Shot-noise variants live in the statistics module.
pub fn reconstruct(state: &RealizedState, cfg: &Method1Config) -> Result<Method1Outcome> {
    let table = match cfg.mode {
        Method1Mode::Exact => weak_table_exact(&state.rho, cfg.coupling)?,
        Method1Mode::Probability => {
            let pointer = PathPointerState::from_eta(cfg.eta)?;
            if pointer.eta().norm() <= 0.0 {
                return Err(Error::DegeneratePointer);
            }
            weak_table_probability(&state.rho, &pointer, cfg.coupling, cfg.estimator)?
        }
    };
    Ok(assemble_outcome(
        &table,
        cfg.basis,
        cfg.mode == Method1Mode::Exact,
    ))
}

/// Pure-state shortcut: all four amplitudes from the single postselection
/// |DD>, fixed by normalization and the global-phase convention.
pub fn pure_amplitudes_via_dd(
    psi: &TwoPhotonPureState,
    coupling: Coupling,
) -> Result<TwoPhotonPureState> {
    let rho = crate::states::density_from_pure(psi);
    if postselection_probability(&rho, Bprime::DD) <= POSTSELECTION_TOL {
        return Err(Error::OrthogonalPostselection);
    }
    let mut amps = [C64::ZERO; 4];
    for ij in APRIME_ALL {
        let mv = modular_value(&rho, ij, Bprime::DD, coupling)?;
        // <DD|ij> = 1/2 for every ij, so the weak values are proportional to
        // the amplitudes with an ij-independent constant.
        amps[ij.index()] = modular_to_weak(&mv, coupling)?;
    }
    Ok(TwoPhotonPureState::from_unnormalized(amps)?.phase_canonical())
}
