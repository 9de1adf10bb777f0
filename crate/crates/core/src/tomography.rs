//! Post-processing shared by both methods: projection of raw estimates onto
//! the physical state space and report assembly/serialization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{c64, eigh, Bprime, CMat, C64};
use crate::modular::TargetBasis;
use crate::states::{fidelity, trace_distance, TwoPhotonDensityMatrix};

/// Euclidean projection of a real spectrum onto the probability simplex
/// (clip negatives, renormalize the trace by uniform subtraction over the
/// remaining support).
fn simplex_project(values: &[f64]) -> Vec<f64> {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut shift = 0.0;
    let mut cumulative = 0.0;
    for (k, v) in sorted.iter().enumerate() {
        cumulative += v;
        let candidate = (cumulative - 1.0) / (k + 1) as f64;
        if v - candidate > 0.0 {
            shift = candidate;
        }
    }
    values.iter().map(|v| (v - shift).max(0.0)).collect()
}

/// Nearest (Frobenius) Hermitian, PSD, unit-trace matrix: hermitize, then
/// project the spectrum onto the simplex in the eigenbasis.
pub fn physicality_project(raw: &CMat) -> Result<TwoPhotonDensityMatrix> {
    let herm = raw.add(&raw.adjoint()).scale(c64(0.5, 0.0));
    if herm.trace().re <= 0.0 {
        return Err(Error::DegenerateInput);
    }
    let (vals, vecs) = eigh(&herm);
    let projected = simplex_project(&vals);
    let mut out = CMat::zeros(4, 4);
    for (v, vec) in projected.iter().zip(&vecs) {
        if *v > 0.0 {
            out = out.add(&vec.outer(vec).scale(c64(*v, 0.0)));
        }
    }
    TwoPhotonDensityMatrix::new(out)
}

pub type MatJson = [[[f64; 2]; 4]; 4];

pub fn mat_to_json(m: &CMat) -> MatJson {
    let mut out = [[[0.0; 2]; 4]; 4];
    for r in 0..4 {
        for c in 0..4 {
            let z = m.get(r, c);
            out[r][c] = [z.re, z.im];
        }
    }
    out
}

pub fn mat_from_json(j: &MatJson) -> CMat {
    let mut m = CMat::zeros(4, 4);
    for r in 0..4 {
        for c in 0..4 {
            m.set(r, c, c64(j[r][c][0], j[r][c][1]));
        }
    }
    m
}

/// Run parameters echoed into every report.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimator: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub postselection: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Full machine-readable record of a reconstruction run. Matrices are 4x4
/// nested arrays of [re, im] pairs in HH, HV, VH, VV order; element errors
/// follow the target basis with `null` at omitted positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub method: String,
    pub basis: String,
    pub params: ReportParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_true: Option<MatJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_raw: Option<MatJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_phys: Option<MatJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fidelity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_distance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_abs_element_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub element_abs_error: Option<[[Option<f64>; 4]; 4]>,
    pub omitted: Vec<String>,
}

impl ReconstructionReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidStateSpec(e.to_string()))
    }
}

/// Everything build_report needs about one finished run.
#[derive(Debug, Clone)]
pub struct ReportInputs {
    pub method: String,
    pub basis: TargetBasis,
    pub params: ReportParams,
    pub rho_true: Option<TwoPhotonDensityMatrix>,
    /// Raw estimate in the A' representation.
    pub rho_raw: CMat,
    /// Omitted-element labels ("ROW,COL") in the target basis.
    pub omitted: Vec<String>,
}

fn target_basis_element(m: &CMat, basis: TargetBasis, r: usize, c: usize) -> C64 {
    match basis {
        TargetBasis::Aprime => m.get(r, c),
        TargetBasis::Bprime => {
            m.sandwich(&Bprime::from_index(r).ket(), &Bprime::from_index(c).ket())
        }
    }
}

fn is_omitted(omitted: &[String], basis: TargetBasis, r: usize, c: usize) -> bool {
    let label = format!("{},{}", basis.row_label(r), basis.row_label(c));
    omitted.contains(&label)
}

/// Assembles the report: physicality-projects the raw estimate and computes
/// all metrics against the true state (when known) from the projected
/// matrix. Omitted elements are excluded from the element-error fields.
pub fn build_report(inputs: &ReportInputs) -> ReconstructionReport {
    let phys = physicality_project(&inputs.rho_raw).ok();

    let mut fid = None;
    let mut tdist = None;
    let mut max_err = None;
    let mut element_err = None;

    if let (Some(truth), Some(phys)) = (&inputs.rho_true, &phys) {
        fid = Some(fidelity(phys, truth));
        tdist = Some(trace_distance(phys, truth));

        let mut errs = [[None; 4]; 4];
        let mut max = 0.0f64;
        for r in 0..4 {
            for c in 0..4 {
                if is_omitted(&inputs.omitted, inputs.basis, r, c) {
                    continue;
                }
                let got = target_basis_element(phys.matrix(), inputs.basis, r, c);
                let expect = target_basis_element(truth.matrix(), inputs.basis, r, c);
                let e = (got - expect).norm();
                errs[r][c] = Some(e);
                max = max.max(e);
            }
        }
        element_err = Some(errs);
        max_err = Some(max);
    }

    ReconstructionReport {
        method: inputs.method.clone(),
        basis: inputs.basis.label().to_string(),
        params: inputs.params.clone(),
        rho_true: inputs.rho_true.as_ref().map(|t| mat_to_json(t.matrix())),
        rho_raw: Some(mat_to_json(&inputs.rho_raw)),
        rho_phys: phys.as_ref().map(|p| mat_to_json(p.matrix())),
        fidelity: fid,
        trace_distance: tdist,
        max_abs_element_error: max_err,
        element_abs_error: element_err,
        omitted: inputs.omitted.clone(),
    }
}

/// Oracle-only report: the exact density matrix with no estimation step.
pub fn oracle_report(rho: &TwoPhotonDensityMatrix) -> ReconstructionReport {
    ReconstructionReport {
        method: "oracle".to_string(),
        basis: "aprime".to_string(),
        params: ReportParams::default(),
        rho_true: Some(mat_to_json(rho.matrix())),
        rho_raw: None,
        rho_phys: None,
        fidelity: None,
        trace_distance: None,
        max_abs_element_error: None,
        element_abs_error: None,
        omitted: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{bell_phi_plus, density_from_pure, random_mixed, werner};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn projection_is_identity_on_physical_inputs() {
        for seed in 0..10 {
            let rho = random_mixed(seed, 1 + (seed % 4) as u32).unwrap();
            let projected = physicality_project(rho.matrix()).unwrap();
            assert!(projected.matrix().max_abs_diff(rho.matrix()) <= 1e-12);
        }
    }

    #[test]
    fn projection_clips_negative_spectrum() {
        let raw = CMat::from_diag(&[c64(1.1, 0.0), c64(-0.1, 0.0), C64::ZERO, C64::ZERO]);
        let projected = physicality_project(&raw).unwrap();
        let expect = CMat::from_diag(&[C64::ONE, C64::ZERO, C64::ZERO, C64::ZERO]);
        assert!(projected.matrix().max_abs_diff(&expect) <= 1e-12);
    }

    #[test]
    fn projection_output_is_exactly_hermitian_psd_unit_trace() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        for _ in 0..20 {
            let mut raw = CMat::zeros(4, 4);
            for r in 0..4 {
                for c in 0..4 {
                    raw.set(
                        r,
                        c,
                        c64(rng.gen_range(-0.4..0.6), rng.gen_range(-0.3..0.3)),
                    );
                }
            }
            raw.set(0, 0, raw.get(0, 0) + c64(1.0, 0.0));
            let Ok(p) = physicality_project(&raw) else {
                continue;
            };
            assert!(p.matrix().max_abs_diff(&p.matrix().adjoint()) <= 1e-12);
            assert!((p.matrix().trace().re - 1.0).abs() <= 1e-12);
            let (vals, _) = eigh(p.matrix());
            assert!(vals.iter().all(|&v| v >= -1e-13));

            // Idempotence.
            let again = physicality_project(p.matrix()).unwrap();
            assert!(again.matrix().max_abs_diff(p.matrix()) <= 1e-12);
        }
    }

    #[test]
    fn projection_rejects_nonpositive_trace() {
        let raw = CMat::from_diag(&[c64(-1.0, 0.0); 4]);
        assert!(matches!(
            physicality_project(&raw),
            Err(Error::DegenerateInput)
        ));
    }

    #[test]
    fn projection_beats_naive_clip_and_rescale() {
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        for trial in 0..100 {
            let base = random_mixed(trial, 2).unwrap();
            let mut raw = base.matrix().clone();
            for r in 0..4 {
                for c in 0..4 {
                    raw.set(
                        r,
                        c,
                        raw.get(r, c) + c64(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1)),
                    );
                }
            }
            let herm = raw.add(&raw.adjoint()).scale(c64(0.5, 0.0));
            if herm.trace().re <= 0.1 {
                continue;
            }

            let smart = physicality_project(&raw).unwrap();

            // Naive variant: clip negatives, rescale the trace.
            let (vals, vecs) = eigh(&herm);
            let clipped: Vec<f64> = vals.iter().map(|v| v.max(0.0)).collect();
            let total: f64 = clipped.iter().sum();
            let mut naive = CMat::zeros(4, 4);
            for (v, vec) in clipped.iter().zip(&vecs) {
                naive = naive.add(&vec.outer(vec).scale(c64(v / total, 0.0)));
            }

            let d_smart = smart.matrix().sub(&raw).frobenius_norm();
            let d_naive = naive.sub(&raw).frobenius_norm();
            assert!(
                d_smart <= d_naive + 1e-12,
                "trial {trial}: projection {d_smart} vs naive {d_naive}"
            );
        }
    }

    #[test]
    fn report_round_trip_is_byte_identical() {
        let truth = werner(0.7).unwrap();
        let inputs = ReportInputs {
            method: "method1-probability".into(),
            basis: TargetBasis::Aprime,
            params: ReportParams {
                g: Some(std::f64::consts::FRAC_PI_2),
                eta: Some(0.01),
                mode: Some("probability".into()),
                seed: Some(5),
                ..ReportParams::default()
            },
            rho_true: Some(truth.clone()),
            rho_raw: truth.matrix().clone(),
            omitted: vec![],
        };
        let report = build_report(&inputs);
        let text = report.to_json();
        let parsed = ReconstructionReport::from_json(&text).unwrap();
        assert_eq!(parsed, report);
        assert_eq!(parsed.to_json(), text);

        // Params echo verbatim.
        assert_eq!(report.params.eta, Some(0.01));
        assert_eq!(report.params.g, Some(std::f64::consts::FRAC_PI_2));
        assert_eq!(report.params.seed, Some(5));
    }

    #[test]
    fn report_metrics_for_exact_estimate_are_perfect() {
        let truth = density_from_pure(&bell_phi_plus());
        let inputs = ReportInputs {
            method: "method1-exact".into(),
            basis: TargetBasis::Aprime,
            params: ReportParams::default(),
            rho_true: Some(truth.clone()),
            rho_raw: truth.matrix().clone(),
            omitted: vec![],
        };
        let report = build_report(&inputs);
        assert!(report.fidelity.unwrap() >= 1.0 - 1e-9);
        assert!(report.trace_distance.unwrap() <= 1e-7);
        assert!(report.max_abs_element_error.unwrap() <= 1e-10);
    }

    #[test]
    fn omitted_elements_are_excluded_from_error_fields() {
        let truth = density_from_pure(&bell_phi_plus());
        let inputs = ReportInputs {
            method: "method1-probability".into(),
            basis: TargetBasis::Bprime,
            params: ReportParams::default(),
            rho_true: Some(truth.clone()),
            rho_raw: truth.matrix().clone(),
            omitted: vec![
                "DD,DA".into(),
                "DA,DA".into(),
                "AD,DA".into(),
                "AA,DA".into(),
            ],
        };
        let report = build_report(&inputs);
        let errs = report.element_abs_error.unwrap();
        for r in 0..4 {
            assert!(errs[r][Bprime::DA.index()].is_none());
            assert!(errs[r][Bprime::DD.index()].is_some());
        }
        assert_eq!(report.omitted.len(), 4);
    }
}
