//! Wiener-Hopf factorization `F = F_- D F_+` of invertible Laurent symbols.
//!
//! The complex symbol `omega(F)` is factored through its barrier problem:
//! pairs `(Psi_+, Psi_-)` with `omega(F) Psi_+ = Psi_-`, `Psi_+` analytic in
//! the disc and `Psi_-` analytic outside up to a pole of order `ord` at
//! infinity. A standard solution set yields the partial indices; pairing each
//! solution with its `J`-conjugate gives columns that pull back through
//! `chi` to quaternionic factors.

use serde::{Deserialize, Serialize};

use crate::circle::{self, InverseOptions, InvertibilityCertificate};
use crate::embedding::{self, chi_inverse, operator_norm, qinverse};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector};
use crate::qmatrix::QMatrix;
use crate::quaternion::{Quaternion, SliceFrame};
use crate::series::{ComplexLaurentSeries, LaurentQSeries};

/// Largest FFT grid used while resolving the inverse symbol.
pub const BARRIER_GRID_CAP: usize = 1 << 18;

/// Numerical settings for the barrier problem.
#[derive(Clone, Copy, Debug)]
pub struct BarrierConfig {
    /// Relative singular-value threshold for null spaces.
    pub rank_tol: f64,
    /// Relative threshold for new directions among values at zero.
    pub value_tol: f64,
    /// Relative size below which inverse-symbol coefficients count as negligible.
    pub decay_tol: f64,
    pub grid_cap: usize,
}

impl Default for BarrierConfig {
    fn default() -> Self {
        BarrierConfig { rank_tol: 1e-9, value_tol: 1e-7, decay_tol: 1e-14, grid_cap: BARRIER_GRID_CAP }
    }
}

/// One solution of the barrier problem.
#[derive(Clone, Debug)]
pub struct BarrierSolution {
    /// Highest power of `z` in `Psi_-`.
    pub ord: i64,
    /// Coefficients of `Psi_-` for powers `lo..=ord`.
    pub psi_minus: Vec<(i64, CVector)>,
    /// Leading coefficients of `Psi_+ = omega(F)^{-1} Psi_-` (powers `0..`).
    pub psi_plus: Vec<(i64, CVector)>,
    /// `Psi_+(0)`.
    pub value_at_zero: CVector,
}

impl BarrierSolution {
    /// `J conj(Psi(conj z))`, again a solution with the same order.
    pub fn tilde(&self) -> BarrierSolution {
        let t = |v: &Vec<(i64, CVector)>| v.iter().map(|(u, c)| (*u, linalg::j_conj_vec(c))).collect();
        BarrierSolution {
            ord: self.ord,
            psi_minus: t(&self.psi_minus),
            psi_plus: t(&self.psi_plus),
            value_at_zero: linalg::j_conj_vec(&self.value_at_zero),
        }
    }
}

/// Precomputed data for the barrier problem of one complex symbol.
pub struct BarrierProblem {
    size: usize,
    lo: i64,
    hi: i64,
    /// Laurent coefficients of `omega(F)^{-1}`, indexed by `u + half`.
    inv: Vec<CMatrix>,
    half: i64,
    m_neg: i64,
    m_pos: i64,
}

impl BarrierProblem {
    pub fn new(fc: &ComplexLaurentSeries, cfg: &BarrierConfig) -> Result<Self> {
        let (lo, hi) = fc.support().ok_or(Error::NotInvertible { min_modulus: 0.0 })?;
        let width = (hi - lo).max(1);
        let mut n = (16 * width as usize).max(64).next_power_of_two();
        loop {
            let coeffs = circle::inverse_coefficients(fc, n, 0.0)?;
            let half = (n / 2) as i64;
            let norms: Vec<f64> = coeffs.iter().map(|(_, c)| c.norm()).collect();
            let scale = norms.iter().cloned().fold(0.0, f64::max);
            let mut outer: Vec<f64> = norms[..norms.len() / 8].iter().chain(&norms[norms.len() - norms.len() / 8..]).cloned().collect();
            outer.sort_by(f64::total_cmp);
            let floor = outer.get(outer.len() / 2).copied().unwrap_or(0.0);
            let thr = (cfg.decay_tol * scale).max(10.0 * floor);
            // coeffs[k] holds power k - half.
            let first_big = norms.iter().position(|&x| x > thr).unwrap_or(0) as i64 - half;
            let last_big = norms.iter().rposition(|&x| x > thr).unwrap_or(0) as i64 - half;
            let m_neg = (-first_big).max(0) + 1;
            let m_pos = last_big.max(0) + 1;
            let reach = half / 2 - (hi - lo) - lo.abs().max(hi.abs());
            if m_neg <= reach && m_pos <= reach && thr <= 1e-10 * scale {
                return Ok(BarrierProblem {
                    size: fc.size(),
                    lo,
                    hi,
                    inv: coeffs.into_iter().map(|(_, c)| c).collect(),
                    half,
                    m_neg,
                    m_pos,
                });
            }
            n *= 2;
            if n > cfg.grid_cap {
                return Err(Error::DegreeCapExceeded(format!(
                    "inverse symbol does not decay within a {} point grid",
                    n / 2
                )));
            }
        }
    }

    pub fn support(&self) -> (i64, i64) {
        (self.lo, self.hi)
    }

    fn h(&self, u: i64) -> Option<&CMatrix> {
        let k = u + self.half;
        if k < 0 || k >= self.inv.len() as i64 {
            None
        } else {
            Some(&self.inv[k as usize])
        }
    }

    /// Matrix whose null space is the set of `Psi_-` with powers `lo..=b` solving the problem.
    fn constraint_matrix(&self, b: i64) -> CMatrix {
        let n = self.size;
        let cols = (b - self.lo + 1) as usize;
        let row_lo = (self.lo - self.m_neg).min(-1);
        let rows = (-row_lo) as usize;
        let mut t = CMatrix::zeros(rows * n, cols * n);
        for (ri, m) in (row_lo..0).enumerate() {
            for (ci, s) in (self.lo..=b).enumerate() {
                if let Some(h) = self.h(m - s) {
                    t.view_mut((ri * n, ci * n), (n, n)).copy_from(h);
                }
            }
        }
        t
    }

    /// Maps stacked `Psi_-` coefficients to `Psi_+(0)`.
    fn value_matrix(&self, b: i64) -> CMatrix {
        let n = self.size;
        let cols = (b - self.lo + 1) as usize;
        let mut v = CMatrix::zeros(n, cols * n);
        for (ci, s) in (self.lo..=b).enumerate() {
            if let Some(h) = self.h(-s) {
                v.view_mut((0, ci * n), (n, n)).copy_from(h);
            }
        }
        v
    }

    fn solution_from_stack(&self, b: i64, x: &CVector) -> BarrierSolution {
        let n = self.size;
        let psi_minus: Vec<(i64, CVector)> =
            (self.lo..=b).enumerate().map(|(ci, s)| (s, x.rows(ci * n, n).into_owned())).collect();
        let scale = x.norm().max(f64::MIN_POSITIVE);
        let ord = psi_minus
            .iter()
            .rev()
            .find(|(_, c)| c.norm() > 1e-8 * scale)
            .map_or(self.lo, |(s, _)| *s);
        let plus_at = |m: i64| {
            let mut acc = CVector::zeros(n);
            for (s, c) in &psi_minus {
                if let Some(h) = self.h(m - s) {
                    acc += h * c;
                }
            }
            acc
        };
        let psi_plus: Vec<(i64, CVector)> = (0..=self.m_pos + b - self.lo).map(|m| (m, plus_at(m))).collect();
        let value_at_zero = psi_plus[0].1.clone();
        BarrierSolution { ord, psi_minus, psi_plus, value_at_zero }
    }

    /// Orthonormal basis of the solutions with `ord <= b`, as stacked coefficient vectors.
    fn solution_space(&self, b: i64, cfg: &BarrierConfig) -> CMatrix {
        let t = self.constraint_matrix(b);
        let scale = self.inv.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let smax = linalg::spectral_norm(&t).max(scale).max(f64::MIN_POSITIVE);
        linalg::nullspace(&t, cfg.rank_tol * smax)
    }
}

/// A basis of all barrier solutions with `ord <= ord_budget`.
pub fn solve_barrier_complex(
    fc: &ComplexLaurentSeries,
    ord_budget: i64,
    cfg: &BarrierConfig,
) -> Result<Vec<BarrierSolution>> {
    let prob = BarrierProblem::new(fc, cfg)?;
    if ord_budget < prob.lo {
        return Ok(vec![]);
    }
    let ns = prob.solution_space(ord_budget, cfg);
    Ok((0..ns.ncols()).map(|c| prob.solution_from_stack(ord_budget, &ns.column(c).into_owned())).collect())
}

/// Layout of solutions in a standard set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LexOrder {
    /// Positions `1..2n` in decreasing order.
    Natural,
    /// Positions `1, n+1, 2, n+2, ...` in decreasing order.
    #[default]
    Interleaved,
}

impl LexOrder {
    /// `positions()[r]` is the slot of the `r`-th largest solution.
    pub fn positions(self, size: usize) -> Vec<usize> {
        match self {
            LexOrder::Natural => (0..size).collect(),
            LexOrder::Interleaved => {
                let n = size / 2;
                (0..size).map(|r| if r % 2 == 0 { r / 2 } else { n + r / 2 }).collect()
            }
        }
    }
}

/// A standard solution set: values at zero independent and orders minimal.
#[derive(Clone, Debug)]
pub struct SolutionSet {
    /// Solutions sorted by decreasing `ord`.
    pub solutions: Vec<BarrierSolution>,
    pub order: LexOrder,
}

impl SolutionSet {
    pub fn ords(&self) -> Vec<i64> {
        self.solutions.iter().map(|s| s.ord).collect()
    }

    /// Solutions arranged by slot.
    pub fn by_position(&self) -> Vec<&BarrierSolution> {
        let size = self.solutions.len();
        let pos = self.order.positions(size);
        let mut slots: Vec<Option<&BarrierSolution>> = vec![None; size];
        for (r, s) in self.solutions.iter().enumerate() {
            slots[pos[r]] = Some(s);
        }
        slots.into_iter().map(|s| s.expect("positions form a permutation")).collect()
    }
}

/// Builds a standard solution set by sweeping the order budget upward from the
/// lowest admissible order.
pub fn standard_solution_set(fc: &ComplexLaurentSeries, order: LexOrder, cfg: &BarrierConfig) -> Result<SolutionSet> {
    let prob = BarrierProblem::new(fc, cfg)?;
    let size = prob.size;
    let mut chosen: Vec<BarrierSolution> = Vec::new();
    let mut span = CMatrix::zeros(size, 0);
    for b in prob.lo..=prob.hi {
        let ns = prob.solution_space(b, cfg);
        if ns.ncols() == 0 {
            continue;
        }
        let vals = prob.value_matrix(b) * &ns;
        let vscale = linalg::spectral_norm(&vals).max(f64::MIN_POSITIVE);
        let resid = linalg::residual_against(&span, &vals);
        let s = linalg::svd(&resid);
        let new = s.sigma.iter().filter(|&&x| x > cfg.value_tol * vscale).count();
        for k in 0..new.min(size - chosen.len()) {
            let x = &ns * s.v.column(k);
            let sol = prob.solution_from_stack(b, &x);
            chosen.push(sol);
        }
        span = linalg::orth(
            &CMatrix::from_columns(&chosen.iter().map(|c| c.value_at_zero.clone()).collect::<Vec<_>>()),
            1e-10,
        );
        if chosen.len() == size {
            break;
        }
    }
    if chosen.len() != size {
        return Err(Error::InternalInvariantViolation(format!(
            "found {} of {} standard solutions",
            chosen.len(),
            size
        )));
    }
    for s in &mut chosen {
        // Solutions picked at budget b have order exactly b up to round-off.
        s.ord = s.ord.max(prob.lo);
    }
    chosen.sort_by(|a, b| b.ord.cmp(&a.ord));
    Ok(SolutionSet { solutions: chosen, order })
}

/// Pairs `{Psi~_m, Psi_m}` produced by [`symmetrize`].
#[derive(Clone, Debug)]
pub struct PairedSet {
    /// Base solutions, decreasing order.
    pub bases: Vec<BarrierSolution>,
    /// `J`-conjugates of the bases, same order.
    pub tildes: Vec<BarrierSolution>,
}

impl PairedSet {
    pub fn indices(&self) -> Vec<i64> {
        self.bases.iter().map(|b| b.ord).collect()
    }

    /// The `2n` columns `[Psi~_1..Psi~_n, Psi_1..Psi_n]`.
    pub fn columns(&self) -> Vec<&BarrierSolution> {
        self.tildes.iter().chain(self.bases.iter()).collect()
    }
}

/// Replaces solutions of a standard set by `J`-conjugate pairs, level by level,
/// keeping the set standard.
pub fn symmetrize(set: &SolutionSet, _frame: &SliceFrame) -> Result<PairedSet> {
    let size = set.solutions.len();
    if size % 2 != 0 {
        return Err(Error::DimensionMismatch("solution set of odd size".into()));
    }
    let mut levels: Vec<i64> = set.ords();
    levels.sort();
    levels.dedup();
    let mut span = CMatrix::zeros(size, 0);
    let mut bases: Vec<BarrierSolution> = Vec::new();
    let vtol = 1e-6;
    for b in levels {
        for cand in set.solutions.iter().filter(|s| s.ord == b) {
            let v = &cand.value_at_zero;
            let r = linalg::residual_against(&span, &CMatrix::from_columns(&[v.clone()]));
            if r.norm() <= vtol * v.norm() {
                continue;
            }
            let t = cand.tilde();
            let pair = CMatrix::from_columns(&[v.clone(), t.value_at_zero.clone()]);
            let grown = linalg::orth(&linalg::hstack(&span, &pair), 1e-9 * v.norm().max(1e-300));
            if grown.ncols() != span.ncols() + 2 {
                return Err(Error::InternalInvariantViolation(
                    "a solution and its J-conjugate have dependent values at zero".into(),
                ));
            }
            span = grown;
            bases.push(cand.clone());
        }
        let expected = set.solutions.iter().filter(|s| s.ord <= b).count();
        if span.ncols() != expected {
            return Err(Error::InternalInvariantViolation(format!(
                "paired span has dimension {} at order {b}, expected {expected}",
                span.ncols()
            )));
        }
    }
    bases.sort_by(|a, b| b.ord.cmp(&a.ord));
    let tildes = bases.iter().map(BarrierSolution::tilde).collect();
    Ok(PairedSet { bases, tildes })
}

/// Quaternionic matrix whose embedding has the given `2n` columns (must be `J`-paired).
fn pull_back_columns(cols: &[&CVector], frame: &SliceFrame) -> Result<QMatrix> {
    let m = CMatrix::from_columns(&cols.iter().map(|c| (*c).clone()).collect::<Vec<_>>());
    chi_inverse(&m, frame, 1e-9)
}

/// Certificate for a one-sided factor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SideCertificate {
    pub min_modulus: f64,
    pub det_winding: i64,
    /// Norm of coefficients on the wrong side of zero.
    pub wrong_side_mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorCertificates {
    pub invertibility: InvertibilityCertificate,
    pub f_minus: SideCertificate,
    pub f_plus: SideCertificate,
}

/// Result of a factorization `F = F_- D F_+` with `D = diag(p^{k_1}, ..., p^{k_n})`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FactorizationResult {
    pub schema_version: u32,
    /// Partial indices, decreasing.
    pub indices: Vec<i64>,
    pub f_minus: LaurentQSeries,
    pub f_plus: LaurentQSeries,
    pub f_minus_inv: LaurentQSeries,
    pub f_plus_inv: LaurentQSeries,
    /// Sup over a circle grid of `||omega(F - F_- D F_+)||`.
    pub residual: f64,
    pub certificates: FactorCertificates,
}

impl FactorizationResult {
    pub fn d(&self) -> LaurentQSeries {
        diag_powers(&self.indices)
    }

    /// `F_- D F_+` recomputed from the factors.
    pub fn product(&self) -> Result<LaurentQSeries> {
        self.f_minus.star_mul(&self.d())?.star_mul(&self.f_plus)
    }
}

/// `diag(p^{k_1}, ..., p^{k_n})`.
pub fn diag_powers(indices: &[i64]) -> LaurentQSeries {
    let n = indices.len();
    let mut d = LaurentQSeries::zero(n);
    for (m, &k) in indices.iter().enumerate() {
        let mut c = QMatrix::zeros(n, n);
        c[(m, m)] = Quaternion::ONE;
        d.add_term(k, c).expect("square");
    }
    d
}

/// Options for [`factor_discrete`].
#[derive(Clone, Copy, Debug)]
pub struct FactorOptions {
    pub tol: f64,
    pub order: LexOrder,
    pub barrier: BarrierConfig,
    /// Grid for the invertibility test and residual.
    pub grid: usize,
    /// Largest accepted residual, relative to `max(1, ||F||)`.
    pub max_residual: f64,
}

impl Default for FactorOptions {
    fn default() -> Self {
        FactorOptions { tol: 1e-10, order: LexOrder::Interleaved, barrier: BarrierConfig::default(), grid: 512, max_residual: 1e-8 }
    }
}

/// Factorization `F = F_- D F_+` of a Laurent symbol invertible on the circle.
pub fn factor_discrete(f_series: &LaurentQSeries, frame: &SliceFrame, opts: &FactorOptions) -> Result<FactorizationResult> {
    let n = f_series.n();
    let cert = circle::is_invertible(f_series, frame, 64, 1e-8_f64.min(opts.tol * 100.0))?;
    if !cert.invertible {
        return Err(Error::NotInvertible { min_modulus: cert.min_modulus });
    }
    let fc = f_series.omega(frame);
    let set = standard_solution_set(&fc, opts.order, &opts.barrier)?;
    let paired = symmetrize(&set, frame)?;
    let indices = paired.indices();
    let det_index = circle::winding_from_certificate(&cert)?;
    if indices.iter().sum::<i64>() != det_index {
        return Err(Error::InternalInvariantViolation(format!(
            "partial indices {indices:?} do not sum to the winding index {det_index}"
        )));
    }

    // Phi_-: quaternionic Laurent polynomial with omega(Phi_-) = [Psi~ | Psi].
    let cols = paired.columns();
    let (lo, _) = f_series.support().expect("invertible symbol is nonzero");
    let top = indices[0];
    let mut phi_minus = LaurentQSeries::zero(n);
    for s in lo..=top {
        let col_s: Vec<CVector> = cols
            .iter()
            .map(|c| c.psi_minus.iter().find(|(u, _)| *u == s).map_or_else(|| CVector::zeros(2 * n), |(_, v)| v.clone()))
            .collect();
        let refs: Vec<&CVector> = col_s.iter().collect();
        let coeff = pull_back_columns(&refs, frame)?;
        if coeff.max_abs() > 0.0 {
            phi_minus.add_term(s, coeff)?;
        }
    }

    // F_- = Phi_- D^{-1}: column m shifted by -k_m.
    let mut f_minus = LaurentQSeries::zero(n);
    for (s, c) in phi_minus.terms() {
        for (m, &k) in indices.iter().enumerate() {
            let mut col = QMatrix::zeros(n, n);
            for r in 0..n {
                col[(r, m)] = c[(r, m)];
            }
            f_minus.add_term(s - k, col)?;
        }
    }

    let inv_opts = InverseOptions { tol: opts.tol, ..Default::default() };
    let phi_minus_inv = circle::star_inverse(&phi_minus, frame, inv_opts)?;
    let deg_plus = f_series.width();
    let f_plus_full = phi_minus_inv.star_mul(f_series)?;
    let fscale = f_series.norm().max(1.0);
    let f_plus = f_plus_full.truncated(0, deg_plus).pruned(1e-14 * fscale);
    let plus_leak = f_plus_full.mass_outside(0, deg_plus);

    let f_minus_inv_full = circle::star_inverse(&f_minus, frame, inv_opts)?;
    let f_minus_inv = f_minus_inv_full.truncated(i64::MIN, 0);
    let f_plus_inv_full = circle::star_inverse(&f_plus, frame, inv_opts)?;
    let f_plus_inv = f_plus_inv_full.truncated(0, i64::MAX);

    let mut result = FactorizationResult {
        schema_version: 1,
        indices,
        f_minus: f_minus.truncated(i64::MIN, 0),
        f_plus,
        f_minus_inv,
        f_plus_inv,
        residual: f64::NAN,
        certificates: FactorCertificates {
            invertibility: cert,
            f_minus: SideCertificate { min_modulus: 0.0, det_winding: 0, wrong_side_mass: 0.0 },
            f_plus: SideCertificate { min_modulus: 0.0, det_winding: 0, wrong_side_mass: plus_leak },
        },
    };
    normalize(&mut result)?;
    let leak_minus = circle::wrong_side_mass(&f_minus, false) + circle::wrong_side_mass(&f_minus_inv_full, false);
    let leak_plus = plus_leak + circle::wrong_side_mass(&f_plus_inv_full, true);
    result.certificates.f_minus = side_certificate(&result.f_minus, frame, leak_minus)?;
    result.certificates.f_plus = side_certificate(&result.f_plus, frame, leak_plus)?;
    result.residual = factorization_residual(f_series, &result, frame, opts.grid)?;
    let bound = opts.max_residual * f_series.norm().max(1.0);
    if !(result.residual <= bound) {
        return Err(Error::ResidualTooLarge { residual: result.residual, tol: bound });
    }
    Ok(result)
}

fn side_certificate(g: &LaurentQSeries, frame: &SliceFrame, leak: f64) -> Result<SideCertificate> {
    let c = circle::is_invertible(g, frame, 64, 0.0)?;
    Ok(SideCertificate {
        min_modulus: c.min_modulus,
        det_winding: c.det_winding.ok_or(Error::NotInvertible { min_modulus: c.min_modulus })?,
        wrong_side_mass: leak,
    })
}

/// Sup over an `n`-point circle grid of `||omega(F - F_- D F_+)||`.
pub fn factorization_residual(
    f_series: &LaurentQSeries,
    r: &FactorizationResult,
    frame: &SliceFrame,
    grid: usize,
) -> Result<f64> {
    let diff = f_series.sub(&r.product()?)?;
    Ok(circle::sup_norm(&diff, frame, grid))
}

/// Puts `F_+(0)` in a normal form: within each group of equal indices its rows
/// are orthonormal and obtained from the original rows by a lower-triangular
/// transform with positive real diagonal.
fn normalize(r: &mut FactorizationResult) -> Result<()> {
    let n = r.indices.len();
    let c0 = r.f_plus.coeff_or_zero(0);
    let mut c = QMatrix::zeros(n, n);
    let mut start = 0;
    while start < n {
        let mut end = start;
        while end < n && r.indices[end] == r.indices[start] {
            end += 1;
        }
        let rows = c0.block(start, 0, end - start, n);
        let t = lq_transform(&rows)?;
        c.set_block(start, start, &t);
        start = end;
    }
    let c_inv = qinverse(&c)?;
    r.f_plus = r.f_plus.left_mul_const(&c)?;
    r.f_minus = r.f_minus.right_mul_const(&c_inv)?;
    r.f_plus_inv = r.f_plus_inv.right_mul_const(&c_inv)?;
    r.f_minus_inv = r.f_minus_inv.left_mul_const(&c)?;
    Ok(())
}

fn row_inner(x: &[Quaternion], y: &[Quaternion]) -> Quaternion {
    x.iter().zip(y).map(|(a, b)| *a * b.conj()).sum()
}

/// Lower-triangular `T` with positive real diagonal such that `T rows` has orthonormal rows.
fn lq_transform(rows: &QMatrix) -> Result<QMatrix> {
    let g = rows.rows();
    let mut t = QMatrix::identity(g);
    let mut ortho: Vec<Vec<Quaternion>> = Vec::new();
    for i in 0..g {
        let mut v = rows.row(i);
        let mut ti = t.row(i);
        for (j, q) in ortho.iter().enumerate() {
            let a = row_inner(&v, q);
            for (vk, qk) in v.iter_mut().zip(q) {
                *vk -= a * *qk;
            }
            for k in 0..g {
                ti[k] -= a * t[(j, k)];
            }
        }
        let nv = row_inner(&v, &v).w.sqrt();
        if nv < 1e-12 {
            return Err(Error::InternalInvariantViolation("F_+(0) has dependent rows".into()));
        }
        for k in 0..g {
            t[(i, k)] = ti[k] / nv;
        }
        ortho.push(v.into_iter().map(|x| x / nv).collect());
    }
    Ok(t)
}

/// Independent checks of a claimed factorization.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerificationReport {
    pub residual: f64,
    pub indices_sorted: bool,
    pub index_sum: i64,
    pub winding_index: i64,
    pub f_minus_support_ok: bool,
    pub f_plus_support_ok: bool,
    pub f_minus_invertible: bool,
    pub f_plus_invertible: bool,
    pub ok: bool,
}

/// Recomputes the residual, supports, invertibility of the factors and the index sum.
pub fn verify_factorization(
    f_series: &LaurentQSeries,
    r: &FactorizationResult,
    frame: &SliceFrame,
    tol: f64,
) -> Result<VerificationReport> {
    let residual = factorization_residual(f_series, r, frame, 512)?;
    let winding_index = circle::winding_index(f_series, frame, 64)?;
    let index_sum = r.indices.iter().sum();
    let minus_ok = r.f_minus.support().is_none_or(|(_, hi)| hi <= 0);
    let plus_ok = r.f_plus.support().is_none_or(|(lo, _)| lo >= 0);
    let side_ok = |g: &LaurentQSeries| -> Result<bool> {
        let c = circle::is_invertible(g, frame, 64, 1e-12)?;
        Ok(c.invertible && c.det_winding == Some(0))
    };
    let f_minus_invertible = side_ok(&r.f_minus)?;
    let f_plus_invertible = side_ok(&r.f_plus)?;
    let indices_sorted = r.indices.windows(2).all(|w| w[0] >= w[1]);
    let scale = f_series.norm().max(1.0);
    let ok = residual <= tol * scale
        && indices_sorted
        && index_sum == winding_index
        && minus_ok
        && plus_ok
        && f_minus_invertible
        && f_plus_invertible;
    Ok(VerificationReport {
        residual,
        indices_sorted,
        index_sum,
        winding_index,
        f_minus_support_ok: minus_ok,
        f_plus_support_ok: plus_ok,
        f_minus_invertible,
        f_plus_invertible,
        ok,
    })
}

/// Largest coefficient norm of `G_-^{-1} F_-` minus its constant term; zero when the
/// two minus factors differ by a constant on the right.
pub fn constant_ratio_defect(f_minus: &LaurentQSeries, g_minus: &LaurentQSeries, frame: &SliceFrame) -> Result<f64> {
    let g_inv = circle::star_inverse(g_minus, frame, InverseOptions { tol: 1e-12, ..Default::default() })?;
    let ratio = g_inv.star_mul(f_minus)?;
    Ok(ratio.terms().filter(|(u, _)| *u != 0).map(|(_, c)| operator_norm(c)).sum())
}

/// Checks that `J conj(Q) J^T = Q` for every coefficient of a complex series.
pub fn series_symmetry_residual(s: &ComplexLaurentSeries) -> f64 {
    s.terms().map(|(_, c)| embedding::symmetry_residual(c)).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(w: f64, x: f64, y: f64, z: f64) -> Quaternion {
        Quaternion::new(w, x, y, z)
    }

    fn planted(k: i64) -> (LaurentQSeries, LaurentQSeries, LaurentQSeries) {
        let qq = q(0.0, 0.6, 0.0, 0.8);
        let r = q(0.5, 0.5, 0.5, 0.5);
        let fm = LaurentQSeries::scalar(&[(0, Quaternion::ONE), (-1, -qq * 0.5)]);
        let fp = LaurentQSeries::scalar(&[(0, Quaternion::ONE), (1, -r * (1.0 / 3.0))]);
        let f = fm.star_mul(&diag_powers(&[k])).unwrap().star_mul(&fp).unwrap();
        (f, fm, fp)
    }

    #[test]
    fn scalar_planted_indices() {
        let frame = SliceFrame::default();
        for k in [-1, 0, 1, 2] {
            let (f, fm, _) = planted(k);
            let res = factor_discrete(&f, &frame, &FactorOptions::default()).unwrap();
            assert_eq!(res.indices, vec![k]);
            assert!(res.residual < 1e-9, "residual {}", res.residual);
            assert!(constant_ratio_defect(&res.f_minus, &fm, &frame).unwrap() < 1e-8);
            let rep = verify_factorization(&f, &res, &frame, 1e-8).unwrap();
            assert!(rep.ok, "{rep:?}");
        }
    }

    #[test]
    fn p_minus_half_has_trivial_plus_factor() {
        let f = LaurentQSeries::scalar(&[(1, Quaternion::ONE), (0, q(-0.5, 0.0, 0.0, 0.0))]);
        let res = factor_discrete(&f, &SliceFrame::default(), &FactorOptions::default()).unwrap();
        assert_eq!(res.indices, vec![1]);
        assert!(res.f_plus.num_terms() == 1);
    }

    fn triangular(power: i64) -> LaurentQSeries {
        let mut f = diag_powers(&[2, -1]);
        let mut off = QMatrix::zeros(2, 2);
        off[(0, 1)] = q(0.0, 0.1, 0.2, 0.0);
        f.add_term(power, off).unwrap();
        f
    }

    #[test]
    fn triangular_symbol_with_removable_coupling() {
        // A coupling at power 2 can be cleared by a right W_+ factor.
        let res = factor_discrete(&triangular(2), &SliceFrame::default(), &FactorOptions::default()).unwrap();
        assert_eq!(res.indices, vec![2, -1]);
        assert!(res.residual < 1e-9);
    }

    #[test]
    fn triangular_symbol_with_essential_coupling() {
        // [[p^2, c p], [0, p^-1]] maps [-c; p] to [0; 1], an order-0 solution,
        // so the indices are (1, 0) rather than the diagonal exponents.
        let res = factor_discrete(&triangular(1), &SliceFrame::default(), &FactorOptions::default()).unwrap();
        assert_eq!(res.indices, vec![1, 0]);
        assert!(res.residual < 1e-9);
    }

    #[test]
    fn non_invertible_symbol_is_rejected() {
        let f = LaurentQSeries::scalar(&[(1, Quaternion::ONE), (0, -q(0.0, 0.0, 1.0, 0.0))]);
        assert!(matches!(
            factor_discrete(&f, &SliceFrame::default(), &FactorOptions::default()),
            Err(Error::NotInvertible { .. })
        ));
    }

    #[test]
    fn interleaved_positions() {
        assert_eq!(LexOrder::Interleaved.positions(6), vec![0, 3, 1, 4, 2, 5]);
        assert_eq!(LexOrder::Natural.positions(4), vec![0, 1, 2, 3]);
    }
}
