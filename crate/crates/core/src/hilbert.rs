//! Dense complex linear algebra over the 2- and 4-dimensional Hilbert spaces
//! of one and two polarization qubits, plus the two mutually unbiased product
//! bases used throughout the reconstruction pipelines.
//!
//! Conventions fixed here and used everywhere else:
//! * two-photon basis order is HH, HV, VH, VV (row and column),
//! * |D> = (|H> + |V>)/sqrt(2), |A> = (|H> - |V>)/sqrt(2),
//! * tensor-product index = 2 * (first-photon index) + (second-photon index).

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const NORM_TOL: f64 = 1e-12;

pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Complex column vector of dimension 2 or 4.
#[derive(Debug, Clone, PartialEq)]
pub struct CVec {
    entries: Vec<C64>,
}

impl CVec {
    pub fn new(entries: Vec<C64>) -> Self {
        Self { entries }
    }

    pub fn from_reals(reals: &[f64]) -> Self {
        Self::new(reals.iter().map(|&r| c64(r, 0.0)).collect())
    }

    /// Computational basis ket |k> in a `dim`-dimensional space.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut entries = vec![C64::ZERO; dim];
        entries[k] = C64::ONE;
        Self { entries }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            entries: vec![C64::ZERO; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, k: usize) -> C64 {
        self.entries[k]
    }

    pub fn set(&mut self, k: usize, v: C64) {
        self.entries[k] = v;
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.entries
    }

    /// Inner product <self|other>, conjugating `self`.
    pub fn inner(&self, other: &CVec) -> C64 {
        assert_eq!(self.dim(), other.dim(), "inner product dimension mismatch");
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|c| c.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        self.scale(c64(1.0 / n, 0.0))
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::new(self.entries.iter().map(|c| c * s).collect())
    }

    pub fn add(&self, other: &CVec) -> Self {
        assert_eq!(self.dim(), other.dim());
        Self::new(
            self.entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    /// Outer product |self><other|.
    pub fn outer(&self, other: &CVec) -> CMat {
        let rows = self.dim();
        let cols = other.dim();
        let mut m = CMat::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.set(r, c, self.entries[r] * other.entries[c].conj());
            }
        }
        m
    }

    /// Tensor product |self> (x) |other>, first factor varying slowest.
    pub fn tensor(&self, other: &CVec) -> CVec {
        let mut entries = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.entries {
            for b in &other.entries {
                entries.push(a * b);
            }
        }
        CVec::new(entries)
    }

    /// Rotates the global phase so the largest-magnitude entry is real
    /// positive. Ties resolve to the lowest index.
    pub fn phase_canonical(&self) -> Self {
        let mut best = 0;
        for k in 1..self.dim() {
            if self.entries[k].norm() > self.entries[best].norm() + NORM_TOL {
                best = k;
            }
        }
        let z = self.entries[best];
        if z.norm() < NORM_TOL {
            return self.clone();
        }
        self.scale(z.conj() / c64(z.norm(), 0.0))
    }

    pub fn max_abs_diff(&self, other: &CVec) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    entries: Vec<C64>,
}

impl CMat {
    pub fn new(rows: usize, cols: usize, entries: Vec<C64>) -> Self {
        assert_eq!(
            rows * cols,
            entries.len(),
            "entry count must equal rows*cols"
        );
        Self {
            rows,
            cols,
            entries,
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![C64::ZERO; rows * cols],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for k in 0..dim {
            m.set(k, k, C64::ONE);
        }
        m
    }

    pub fn from_diag(diag: &[C64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (k, &d) in diag.iter().enumerate() {
            m.set(k, k, d);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.entries[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: C64) {
        self.entries[r * self.cols + c] = v;
    }

    pub fn mul(&self, other: &CMat) -> CMat {
        assert_eq!(self.cols, other.rows, "matrix product dimension mismatch");
        let mut out = CMat::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == C64::ZERO {
                    continue;
                }
                for c in 0..other.cols {
                    let v = out.get(r, c) + a * other.get(k, c);
                    out.set(r, c, v);
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &CVec) -> CVec {
        assert_eq!(self.cols, v.dim());
        let mut out = CVec::zeros(self.rows);
        for r in 0..self.rows {
            let mut acc = C64::ZERO;
            for c in 0..self.cols {
                acc += self.get(r, c) * v.get(c);
            }
            out.set(r, acc);
        }
        out
    }

    pub fn add(&self, other: &CMat) -> CMat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        CMat::new(
            self.rows,
            self.cols,
            self.entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    pub fn sub(&self, other: &CMat) -> CMat {
        self.add(&other.scale(c64(-1.0, 0.0)))
    }

    pub fn scale(&self, s: C64) -> CMat {
        CMat::new(
            self.rows,
            self.cols,
            self.entries.iter().map(|c| c * s).collect(),
        )
    }

    pub fn adjoint(&self) -> CMat {
        let mut out = CMat::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.get(r, c).conj());
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        assert_eq!(self.rows, self.cols);
        (0..self.rows).map(|k| self.get(k, k)).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &CMat) -> f64 {
        self.sub(other).max_abs()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|c| c.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.rows == self.cols && self.max_abs_diff(&self.adjoint()) <= tol
    }

    /// Matrix element <bra|M|ket>.
    pub fn sandwich(&self, bra: &CVec, ket: &CVec) -> C64 {
        bra.inner(&self.mul_vec(ket))
    }
}

/// Kronecker product with row index `2*(row of a) + (row of b)` (and the same
/// convention for columns).
pub fn tensor(a: &CMat, b: &CMat) -> CMat {
    let mut out = CMat::zeros(a.rows() * b.rows(), a.cols() * b.cols());
    for ra in 0..a.rows() {
        for ca in 0..a.cols() {
            let f = a.get(ra, ca);
            if f == C64::ZERO {
                continue;
            }
            for rb in 0..b.rows() {
                for cb in 0..b.cols() {
                    out.set(ra * b.rows() + rb, ca * b.cols() + cb, f * b.get(rb, cb));
                }
            }
        }
    }
    out
}

/// Rank-1 projector |k><k|. The ket must be normalized.
pub fn projector(k: &CVec) -> Result<CMat> {
    let norm = k.norm();
    if (norm - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized { norm });
    }
    Ok(k.outer(k))
}

const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

pub fn ket_h() -> CVec {
    CVec::basis(2, 0)
}

pub fn ket_v() -> CVec {
    CVec::basis(2, 1)
}

pub fn ket_d() -> CVec {
    CVec::from_reals(&[SQRT_HALF, SQRT_HALF])
}

pub fn ket_a() -> CVec {
    CVec::from_reals(&[SQRT_HALF, -SQRT_HALF])
}

/// Single-photon polarization label in the H/V basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pol {
    H,
    V,
}

impl Pol {
    pub fn ket(self) -> CVec {
        match self {
            Pol::H => ket_h(),
            Pol::V => ket_v(),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Pol::H => "H",
            Pol::V => "V",
        }
    }
}

/// Single-photon polarization label in the D/A basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagPol {
    D,
    A,
}

impl DiagPol {
    pub fn ket(self) -> CVec {
        match self {
            DiagPol::D => ket_d(),
            DiagPol::A => ket_a(),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            DiagPol::D => "D",
            DiagPol::A => "A",
        }
    }
}

/// Two-photon product index in the A' basis, fixed order HH, HV, VH, VV.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aprime {
    HH,
    HV,
    VH,
    VV,
}

pub const APRIME_ALL: [Aprime; 4] = [Aprime::HH, Aprime::HV, Aprime::VH, Aprime::VV];

impl Aprime {
    pub fn index(self) -> usize {
        match self {
            Aprime::HH => 0,
            Aprime::HV => 1,
            Aprime::VH => 2,
            Aprime::VV => 3,
        }
    }

    pub fn from_index(k: usize) -> Self {
        APRIME_ALL[k]
    }

    pub fn components(self) -> (Pol, Pol) {
        match self {
            Aprime::HH => (Pol::H, Pol::H),
            Aprime::HV => (Pol::H, Pol::V),
            Aprime::VH => (Pol::V, Pol::H),
            Aprime::VV => (Pol::V, Pol::V),
        }
    }

    pub fn ket(self) -> CVec {
        CVec::basis(4, self.index())
    }

    pub fn label(self) -> &'static str {
        match self {
            Aprime::HH => "HH",
            Aprime::HV => "HV",
            Aprime::VH => "VH",
            Aprime::VV => "VV",
        }
    }
}

/// Two-photon product index in the B' basis, fixed order DD, DA, AD, AA.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bprime {
    DD,
    DA,
    AD,
    AA,
}

pub const BPRIME_ALL: [Bprime; 4] = [Bprime::DD, Bprime::DA, Bprime::AD, Bprime::AA];

impl Bprime {
    pub fn index(self) -> usize {
        match self {
            Bprime::DD => 0,
            Bprime::DA => 1,
            Bprime::AD => 2,
            Bprime::AA => 3,
        }
    }

    pub fn from_index(k: usize) -> Self {
        BPRIME_ALL[k]
    }

    pub fn components(self) -> (DiagPol, DiagPol) {
        match self {
            Bprime::DD => (DiagPol::D, DiagPol::D),
            Bprime::DA => (DiagPol::D, DiagPol::A),
            Bprime::AD => (DiagPol::A, DiagPol::D),
            Bprime::AA => (DiagPol::A, DiagPol::A),
        }
    }

    pub fn ket(self) -> CVec {
        let (a, b) = self.components();
        a.ket().tensor(&b.ket())
    }

    pub fn label(self) -> &'static str {
        match self {
            Bprime::DD => "DD",
            Bprime::DA => "DA",
            Bprime::AD => "AD",
            Bprime::AA => "AA",
        }
    }
}

/// The two mutually unbiased two-photon product bases.
#[derive(Debug, Clone)]
pub struct BasisPair {
    pub aprime: [CVec; 4],
    pub bprime: [CVec; 4],
}

pub fn mub_bases() -> BasisPair {
    BasisPair {
        aprime: APRIME_ALL.map(|k| k.ket()),
        bprime: BPRIME_ALL.map(|k| k.ket()),
    }
}

/// Overlap <ab|ij> between a B' bra and an A' ket; always +-1/2.
pub fn overlap_b_a(ab: Bprime, ij: Aprime) -> C64 {
    ab.ket().inner(&ij.ket())
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
///
/// Backed by nalgebra's symmetric (Hermitian) eigensolver; this is the single
/// place the crate touches an external linear-algebra backend.
pub fn eigh(m: &CMat) -> (Vec<f64>, Vec<CVec>) {
    assert!(m.is_hermitian(1e-9), "eigh requires a Hermitian matrix");
    let n = m.rows();
    let na = nalgebra::DMatrix::from_fn(n, n, |r, c| m.get(r, c));
    let se = na.symmetric_eigen();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].partial_cmp(&se.eigenvalues[b]).unwrap());

    let mut values = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n);
    for &k in &order {
        values.push(se.eigenvalues[k]);
        let col = se.eigenvectors.column(k);
        vectors.push(CVec::new(col.iter().copied().collect()));
    }
    (values, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn assert_close(a: C64, b: C64, tol: f64) {
        assert!((a - b).norm() <= tol, "expected {b}, got {a} (tol {tol})");
    }

    #[test]
    fn tensor_of_identities_is_identity() {
        let i2 = CMat::identity(2);
        assert_eq!(tensor(&i2, &i2), CMat::identity(4));
    }

    #[test]
    fn tensor_of_h_and_v_projectors_selects_hv() {
        let ph = projector(&ket_h()).unwrap();
        let pv = projector(&ket_v()).unwrap();
        let expect = CMat::from_diag(&[C64::ZERO, C64::ONE, C64::ZERO, C64::ZERO]);
        assert_eq!(tensor(&ph, &pv), expect);
    }

    #[test]
    fn tensor_of_diagonal_projectors_is_quarter_matrix() {
        // Expanding |D> = (|H>+|V>)/sqrt(2) by hand gives all entries 1/4.
        let pd = projector(&ket_d()).unwrap();
        let t = tensor(&pd, &pd);
        for r in 0..4 {
            for c in 0..4 {
                assert_close(t.get(r, c), c64(0.25, 0.0), 1e-15);
            }
        }
    }

    #[test]
    fn projector_examples() {
        let ph = projector(&ket_h()).unwrap();
        assert_eq!(ph, CMat::from_diag(&[C64::ONE, C64::ZERO]));

        let pd = projector(&ket_d()).unwrap();
        for r in 0..2 {
            for c in 0..2 {
                assert_close(pd.get(r, c), c64(0.5, 0.0), 1e-15);
            }
        }

        let phh = projector(&Aprime::HH.ket()).unwrap();
        assert_eq!(
            phh,
            CMat::from_diag(&[C64::ONE, C64::ZERO, C64::ZERO, C64::ZERO])
        );
    }

    #[test]
    fn projector_rejects_unnormalized_input() {
        let bad = CVec::from_reals(&[1.0, 1.0]);
        assert!(matches!(projector(&bad), Err(Error::NotNormalized { .. })));
    }

    #[test]
    fn projectors_are_idempotent() {
        for k in APRIME_ALL.iter().chain(&[Aprime::HH]) {
            let p = projector(&k.ket()).unwrap();
            assert!(p.mul(&p).max_abs_diff(&p) <= 1e-14);
        }
        for b in BPRIME_ALL {
            let p = projector(&b.ket()).unwrap();
            assert!(p.mul(&p).max_abs_diff(&p) <= 1e-14);
        }
    }

    #[test]
    fn basis_projectors_are_complete() {
        let mut sum_a = CMat::zeros(4, 4);
        let mut sum_b = CMat::zeros(4, 4);
        for k in 0..4 {
            sum_a = sum_a.add(&projector(&Aprime::from_index(k).ket()).unwrap());
            sum_b = sum_b.add(&projector(&Bprime::from_index(k).ket()).unwrap());
        }
        assert!(sum_a.max_abs_diff(&CMat::identity(4)) <= 1e-14);
        assert!(sum_b.max_abs_diff(&CMat::identity(4)) <= 1e-14);
    }

    #[test]
    fn bases_are_mutually_unbiased() {
        let pair = mub_bases();
        for a in &pair.aprime {
            for b in &pair.bprime {
                assert!((b.inner(a).norm_sqr() - 0.25).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn specific_cross_overlaps() {
        assert_close(overlap_b_a(Bprime::DD, Aprime::HH), c64(0.5, 0.0), 1e-15);
        // <HV|DA> = <H|D><V|A> = -1/2; quoted here as the bra-side conjugate.
        assert_close(overlap_b_a(Bprime::DA, Aprime::HV), c64(-0.5, 0.0), 1e-15);
    }

    #[test]
    fn aprime_gram_matrix_is_identity() {
        let pair = mub_bases();
        for (r, u) in pair.aprime.iter().enumerate() {
            for (c, v) in pair.aprime.iter().enumerate() {
                let expect = if r == c { C64::ONE } else { C64::ZERO };
                assert_close(u.inner(v), expect, 1e-15);
            }
        }
    }

    #[test]
    fn eigh_recovers_diagonal_matrix() {
        let m = CMat::from_diag(&[c64(0.3, 0.0), c64(-0.1, 0.0), c64(0.8, 0.0), c64(0.0, 0.0)]);
        let (vals, vecs) = eigh(&m);
        assert!((vals[0] + 0.1).abs() < 1e-12);
        assert!((vals[3] - 0.8).abs() < 1e-12);
        for (v, vec) in vals.iter().zip(&vecs) {
            let mv = m.mul_vec(vec);
            assert!(mv.max_abs_diff(&vec.scale(c64(*v, 0.0))) < 1e-12);
        }
    }

    fn arb_c64() -> impl Strategy<Value = C64> {
        (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(re, im)| c64(re, im))
    }

    fn arb_mat2() -> impl Strategy<Value = CMat> {
        proptest::collection::vec(arb_c64(), 4).prop_map(|v| CMat::new(2, 2, v))
    }

    proptest! {
        // (A (x) B)(C (x) D) = (AC) (x) (BD)
        #[test]
        fn tensor_distributes_over_product(a in arb_mat2(), b in arb_mat2(),
                                           c in arb_mat2(), d in arb_mat2()) {
            let lhs = tensor(&a, &b).mul(&tensor(&c, &d));
            let rhs = tensor(&a.mul(&c), &b.mul(&d));
            prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-12);
        }

        #[test]
        fn tensor_is_associative_up_to_reindexing(a in arb_mat2(), b in arb_mat2(),
                                                  c in arb_mat2()) {
            let lhs = tensor(&tensor(&a, &b), &c);
            let rhs = tensor(&a, &tensor(&b, &c));
            prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-12);
        }
    }
}
