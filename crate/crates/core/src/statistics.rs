//! Finite-statistics layer: turns the exact probabilities and pointer
//! distributions of both reconstruction methods into simulated detector
//! counts and sampled quadrature records, and re-estimates the quantities the
//! exact pipelines consume.
//!
//! Every random quantity draws from an independent substream derived from
//! (master seed, setting label), so settings can run in any order without
//! changing results.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Binomial, Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hilbert::{c64, CMat, APRIME_ALL, BPRIME_ALL, C64};
use crate::modular::{
    assemble_outcome, estimate_modular_from_probabilities, setting_readout, Method1Config,
    Method1Mode, Method1Outcome, ModularValueSet, PathPointerState, WeakValueTable,
    MODULAR_TARGETS, POSTSELECTION_TOL,
};
use crate::sequential::{
    couple_for_setting, postselect, prepare, GaussianKind, GaussianPointerConfig, Method2Config,
    PostselectedPointer,
};
use crate::states::RealizedState;

/// Shot allocation: a default per-setting count, optionally overridden per
/// setting label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotPlan {
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_setting: Option<BTreeMap<String, u64>>,
}

impl ShotPlan {
    pub fn uniform(seed: u64, shots: u64) -> Self {
        Self {
            seed,
            shots: Some(shots),
            per_setting: None,
        }
    }

    pub fn parse_json(text: &str) -> Result<Self> {
        let plan: ShotPlan =
            serde_json::from_str(text).map_err(|e| Error::InvalidShotPlan(e.to_string()))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(0) = self.shots {
            return Err(Error::InvalidShotPlan("shots must be positive".into()));
        }
        if let Some(map) = &self.per_setting {
            if map.values().any(|&n| n == 0) {
                return Err(Error::InvalidShotPlan(
                    "per-setting counts must be positive".into(),
                ));
            }
        }
        if self.shots.is_none() && self.per_setting.is_none() {
            return Err(Error::InvalidShotPlan(
                "either shots or per_setting is required".into(),
            ));
        }
        Ok(())
    }

    pub fn shots_for(&self, label: &str) -> Result<u64> {
        if let Some(map) = &self.per_setting {
            if let Some(&n) = map.get(label) {
                return Ok(n);
            }
        }
        self.shots
            .ok_or_else(|| Error::InvalidShotPlan(format!("no shot count for setting `{label}`")))
    }
}

/// Detector counts for one setting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRecord {
    pub label: String,
    pub successes: u64,
    pub trials: u64,
}

impl CountRecord {
    pub fn estimate(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }
}

/// Independent substream for one setting label.
pub fn stream(seed: u64, label: &str) -> ChaCha12Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha12Rng::from_seed(key)
}

/// Binomially distributed success count for a known probability.
pub fn sample_bernoulli(label: &str, p: f64, n: u64, seed: u64) -> Result<CountRecord> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::ProbabilityOutOfRange(p));
    }
    let mut rng = stream(seed, label);
    let successes = if p <= 0.0 {
        0
    } else if p >= 1.0 {
        n
    } else {
        Binomial::new(n, p).expect("validated p").sample(&mut rng)
    };
    Ok(CountRecord {
        label: label.to_string(),
        successes,
        trials: n,
    })
}

/// Measurement basis per pointer coordinate; position and momentum of one
/// coordinate are never sampled jointly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrature {
    Position,
    Momentum,
}

pub type Pattern = [Quadrature; 4];

/// The 16 mixed position/momentum patterns, ordered by the bitmask whose k-th
/// bit selects momentum for coordinate k (x1, y1, x2, y2).
pub fn all_patterns() -> [Pattern; 16] {
    let mut out = [[Quadrature::Position; 4]; 16];
    for (mask, pattern) in out.iter_mut().enumerate() {
        for k in 0..4 {
            if mask & (1 << k) != 0 {
                pattern[k] = Quadrature::Momentum;
            }
        }
    }
    out
}

/// Maps a measurement pattern to the matching analytic moment kinds.
pub fn pattern_kinds(pattern: &Pattern) -> [GaussianKind; 4] {
    pattern.map(|q| match q {
        Quadrature::Position => GaussianKind::Position,
        Quadrature::Momentum => GaussianKind::Momentum,
    })
}

const ENVELOPE_MIN_PROPOSALS: u64 = 10_000;
const ENVELOPE_MIN_ACCEPT: f64 = 1e-4;

struct ComponentSampler {
    weight_mass: f64,
    amp_sum: f64,
    cumulative: Vec<f64>,
    branches: Vec<(C64, [f64; 4])>,
}

/// Draws i.i.d. samples of the four chosen quadratures from the exact
/// conditional (postselected) pointer density.
///
/// Rejection sampling against a branch-Gaussian mixture envelope inflated by
/// the coherence bound (sum |amp|)^2 / mass; fails if the measured acceptance
/// rate stays below 1e-4.
pub fn sample_pointer_positions(
    post: &PostselectedPointer,
    pattern: &Pattern,
    n: usize,
    rng: &mut ChaCha12Rng,
) -> Result<Vec<[f64; 4]>> {
    let sigma = post.sigma;
    let sigma_p = crate::sequential::HBAR / (2.0 * sigma);

    let mut samplers = Vec::new();
    for (weight, pairs) in &post.components {
        let branches: Vec<(C64, [f64; 4])> = pairs
            .iter()
            .filter(|(b, _)| b.norm() > 1e-14)
            .cloned()
            .collect();
        if branches.is_empty() {
            continue;
        }
        let amp_sum: f64 = branches.iter().map(|(b, _)| b.norm()).sum();
        let mut cumulative = Vec::with_capacity(branches.len());
        let mut acc = 0.0;
        for (b, _) in &branches {
            acc += b.norm() / amp_sum;
            cumulative.push(acc);
        }
        samplers.push(ComponentSampler {
            weight_mass: weight * amp_sum * amp_sum,
            amp_sum,
            cumulative,
            branches,
        });
    }

    let envelope_mass: f64 = samplers.iter().map(|s| s.weight_mass).sum();
    if envelope_mass <= 0.0 {
        return Err(Error::EnvelopeFailure { acceptance: 0.0 });
    }

    let normal_pos = Normal::new(0.0, sigma).expect("positive sigma");
    let normal_mom = Normal::new(0.0, sigma_p).expect("positive sigma_p");

    let mut out = Vec::with_capacity(n);
    let mut proposals: u64 = 0;
    while out.len() < n {
        // Component choice proportional to weight * (sum |amp|)^2.
        let mut pick = rng.gen::<f64>() * envelope_mass;
        let mut chosen = samplers.len() - 1;
        for (k, s) in samplers.iter().enumerate() {
            if pick < s.weight_mass {
                chosen = k;
                break;
            }
            pick -= s.weight_mass;
        }
        let comp = &samplers[chosen];

        let u_branch = rng.gen::<f64>();
        let mut b_idx = comp.branches.len() - 1;
        for (k, c) in comp.cumulative.iter().enumerate() {
            if u_branch <= *c {
                b_idx = k;
                break;
            }
        }
        let center = comp.branches[b_idx].1;

        let mut u = [0.0f64; 4];
        for k in 0..4 {
            u[k] = match pattern[k] {
                Quadrature::Position => center[k] + normal_pos.sample(rng),
                Quadrature::Momentum => normal_mom.sample(rng),
            };
        }

        // Wavefunction value per branch (normalization constants cancel in
        // the acceptance ratio).
        let mut num = C64::ZERO;
        let mut den = 0.0;
        for (beta, disp) in &comp.branches {
            let mut expo = 0.0;
            let mut phase = 0.0;
            for k in 0..4 {
                match pattern[k] {
                    Quadrature::Position => {
                        let d = u[k] - disp[k];
                        expo -= d * d / (4.0 * sigma * sigma);
                    }
                    Quadrature::Momentum => {
                        expo -= u[k] * u[k] / (4.0 * sigma_p * sigma_p);
                        phase -= u[k] * disp[k] / crate::sequential::HBAR;
                    }
                }
            }
            let z = beta * C64::from_polar(expo.exp(), phase);
            num += z;
            den += z.norm_sqr() / beta.norm();
        }

        proposals += 1;
        let accept = num.norm_sqr() / (comp.amp_sum * den);
        if rng.gen::<f64>() < accept {
            out.push(u);
        }

        if proposals >= ENVELOPE_MIN_PROPOSALS {
            let rate = out.len() as f64 / proposals as f64;
            if rate < ENVELOPE_MIN_ACCEPT {
                return Err(Error::EnvelopeFailure { acceptance: rate });
            }
        }
    }
    Ok(out)
}

/// Convenience wrapper deriving the substream from (seed, label).
pub fn sample_pointer_positions_seeded(
    post: &PostselectedPointer,
    pattern: &Pattern,
    n: usize,
    seed: u64,
    label: &str,
) -> Result<Vec<[f64; 4]>> {
    let mut rng = stream(seed, label);
    sample_pointer_positions(post, pattern, n, &mut rng)
}

/// Sample mean and standard error of the four-coordinate product for one
/// pattern.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureMoment {
    pub pattern: Pattern,
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

/// Per-pattern product moments from raw sample sets.
pub fn estimate_moments(samples: &[(Pattern, Vec<[f64; 4]>)]) -> Result<Vec<QuadratureMoment>> {
    let mut out = Vec::with_capacity(samples.len());
    for (pattern, values) in samples {
        let n = values.len();
        if n < 100 {
            return Err(Error::InsufficientSamples { n });
        }
        let products: Vec<f64> = values.iter().map(|u| u[0] * u[1] * u[2] * u[3]).collect();
        let mean = products.iter().sum::<f64>() / n as f64;
        let var = products
            .iter()
            .map(|p| (p - mean) * (p - mean))
            .sum::<f64>()
            / (n - 1) as f64;
        out.push(QuadratureMoment {
            pattern: *pattern,
            mean,
            std_error: (var / n as f64).sqrt(),
            n,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
pub struct ElementEstimate {
    pub value: C64,
    pub std_error: f64,
}

/// Combines the 16 pattern moments into one complex element estimate: the
/// lowering-operator product expands into mixed position/momentum terms with
/// coefficient (i 2 sigma^2/hbar)^(#momentum), everything divided by g^4 and
/// the fixed basis overlaps.
pub fn combine_pattern_moments(
    moments: &[QuadratureMoment],
    p_post: f64,
    pointer: &GaussianPointerConfig,
    overlap_scale: f64,
) -> ElementEstimate {
    let g4 = pointer.g.powi(4);
    let ms = pointer.momentum_scale();
    let mut value = C64::ZERO;
    let mut var = 0.0;
    for m in moments {
        let momentum_count = m
            .pattern
            .iter()
            .filter(|q| **q == Quadrature::Momentum)
            .count() as i32;
        let coeff = c64(0.0, ms).powi(momentum_count) / c64(g4 * overlap_scale, 0.0);
        value += coeff * c64(p_post * m.mean, 0.0);
        let se = coeff.norm() * p_post * m.std_error;
        var += se * se;
    }
    ElementEstimate {
        value,
        std_error: var.sqrt(),
    }
}

/// Method-1 reconstruction from simulated detector counts: the postselection
/// probabilities and all six analyzer probabilities per setting are replaced
/// by binomial estimates before the usual estimator and assembly run.
pub fn reconstruct_method1_sampled(
    state: &RealizedState,
    cfg: &Method1Config,
    plan: &ShotPlan,
) -> Result<Method1Outcome> {
    plan.validate()?;
    if cfg.mode == Method1Mode::Exact {
        return Err(Error::InvalidShotPlan(
            "sampled reconstruction requires the probability pipeline".into(),
        ));
    }
    let pointer = PathPointerState::from_eta(cfg.eta)?;
    if pointer.eta().norm() <= 0.0 {
        return Err(Error::DegeneratePointer);
    }
    let mu = pointer.mu().norm();
    let eta = pointer.eta().norm();

    let mut table = WeakValueTable {
        p: [0.0; 4],
        w: [[None; 4]; 4],
    };
    for ab in BPRIME_ALL {
        let label = format!("m1/post/{}", ab.label());
        let n = plan.shots_for(&label)?;
        let p_exact = crate::modular::postselection_probability(&state.rho, ab);
        table.p[ab.index()] = sample_bernoulli(&label, p_exact, n, plan.seed)?.estimate();
    }

    for ij in APRIME_ALL {
        for ab in BPRIME_ALL {
            if table.p[ab.index()] <= POSTSELECTION_TOL {
                continue;
            }
            let Some(readout) = setting_readout(&state.rho, &pointer, cfg.coupling, ij, ab) else {
                continue;
            };
            let mut est = [C64::ZERO; 3];
            for (slot, target) in MODULAR_TARGETS.iter().enumerate() {
                let (p_re, p_im) = readout.probs.get(*target);
                let base = format!("m1/{}/{}/{:?}", ij.label(), ab.label(), target);
                let label_re = format!("{base}/re");
                let label_im = format!("{base}/im");
                let n_re = plan.shots_for(&label_re)?;
                let n_im = plan.shots_for(&label_im)?;
                let p_re_hat = sample_bernoulli(&label_re, p_re, n_re, plan.seed)?.estimate();
                let p_im_hat = sample_bernoulli(&label_im, p_im, n_im, plan.seed)?.estimate();
                est[slot] = estimate_modular_from_probabilities(
                    p_re_hat,
                    p_im_hat,
                    mu,
                    eta,
                    cfg.estimator,
                )?;
            }
            let mv = ModularValueSet {
                m_sum: est[0],
                m_first: est[1],
                m_second: est[2],
            };
            table.w[ij.index()][ab.index()] =
                Some(crate::modular::modular_to_weak(&mv, cfg.coupling)?);
        }
    }

    Ok(assemble_outcome(&table, cfg.basis, false))
}

/// Method-2 reconstruction from sampled quadrature records with per-element
/// uncertainties.
#[derive(Debug, Clone)]
pub struct Method2SampledOutcome {
    pub elements: CMat,
    pub std_errors: [[f64; 4]; 4],
}

/// Method-2 reconstruction from finite statistics. Each (ij, kl) setting
/// splits its shot budget equally over the 16 moment patterns; per pattern
/// the record count is binomial in the postselection probability and the
/// records themselves come from the exact conditional density.
///
/// Postselections whose expected record count falls below the
/// moment-estimator minimum contribute zero; for physical states those
/// elements are bounded by sqrt(p) and are far below the sampling noise.
pub fn reconstruct_method2_sampled(
    state: &RealizedState,
    cfg: &Method2Config,
    plan: &ShotPlan,
) -> Result<Method2SampledOutcome> {
    plan.validate()?;
    cfg.pointer.validate()?;
    let patterns = all_patterns();
    let mut elements = CMat::zeros(4, 4);
    let mut std_errors = [[0.0f64; 4]; 4];

    for ij in APRIME_ALL {
        let e = prepare(&state.rho, &cfg.pointer)?;
        let e = couple_for_setting(&e, ij, cfg.middle, cfg.pointer.g);
        for kl in APRIME_ALL {
            let setting = format!("m2/{}/{}", ij.label(), kl.label());
            let n_setting = plan.shots_for(&setting)?;
            let n_share = (n_setting / 16).max(1);

            let post = postselect(&e, kl);
            let p_exact = post.mass().clamp(0.0, 1.0);
            let post_label = format!("{setting}/post");
            let p_hat = sample_bernoulli(&post_label, p_exact, n_setting, plan.seed)?.estimate();

            if p_hat * (n_share as f64) < 100.0 {
                continue;
            }

            let mut sampled = Vec::with_capacity(16);
            let mut skip = false;
            for (mask, pattern) in patterns.iter().enumerate() {
                let label = format!("{setting}/pat{mask}");
                let n_rec =
                    sample_bernoulli(&format!("{label}/count"), p_exact, n_share, plan.seed)?
                        .successes as usize;
                if n_rec < 100 {
                    skip = true;
                    break;
                }
                let mut rng = stream(plan.seed, &label);
                let records = sample_pointer_positions(&post, pattern, n_rec, &mut rng)?;
                sampled.push((*pattern, records));
            }
            if skip {
                continue;
            }

            let moments = estimate_moments(&sampled)?;
            let ab = cfg.middle.ket();
            let scale = kl.ket().inner(&ab).re * ab.inner(&ij.ket()).re;
            let est = combine_pattern_moments(&moments, p_hat, &cfg.pointer, scale);
            elements.set(ij.index(), kl.index(), est.value);
            std_errors[ij.index()][kl.index()] = est.std_error;
        }
    }

    Ok(Method2SampledOutcome {
        elements,
        std_errors,
    })
}
