//! Dense primal-dual interior-point solver for small convex quadratic programs.
//!
//! Solves
//!
//! ```text
//! minimize    ½ xᵀ H x + cᵀ x
//! subject to  G x ≤ h
//!             E x = f
//! ```
//!
//! with Mehrotra's predictor-corrector. Every consumer in this crate (Chebyshev
//! centers, projections, via-point optimization, the horizon program of the
//! tracker) has at most a few dozen variables, so constraint rows are stored
//! sparsely and expanded to dense matrices for the solve.

use nalgebra::{DMatrix, DVector};

/// One sparse linear row `Σ coeffs[k].1 · x[coeffs[k].0]`.
#[derive(Clone, Debug, Default)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
}

impl Row {
    pub fn new(coeffs: Vec<(usize, f64)>) -> Self {
        Self { coeffs }
    }

    pub fn dot(&self, x: &DVector<f64>) -> f64 {
        self.coeffs.iter().map(|&(i, v)| v * x[i]).sum()
    }
}

/// Largest relative dual residual accepted from a stalled solve.
const STALLED_DUAL_TOL: f64 = 1e-4;

#[derive(Clone, Copy, Debug)]
pub struct QpSettings {
    pub max_iterations: usize,
    /// Relative tolerance on primal/dual residuals.
    pub feasibility_tol: f64,
    /// Tolerance on the average complementarity `sᵀz / m`.
    pub gap_tol: f64,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            max_iterations: 80,
            feasibility_tol: 1e-11,
            gap_tol: 1e-12,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QpError {
    /// The phase-one program certified that no feasible point exists.
    Infeasible,
    /// Iteration limit reached without meeting tolerances on a feasible problem.
    NotConverged,
    /// Normal equations could not be factorized.
    Singular,
}

impl std::fmt::Display for QpError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            QpError::Infeasible => write!(f, "quadratic program is infeasible"),
            QpError::NotConverged => write!(f, "quadratic program did not converge"),
            QpError::Singular => write!(f, "singular KKT system"),
        }
    }
}

impl std::error::Error for QpError {}

#[derive(Clone, Debug)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Dual multipliers of the inequality rows.
    pub ineq_duals: DVector<f64>,
}

/// A convex QP under construction.
#[derive(Clone, Debug)]
pub struct Qp {
    n: usize,
    hessian: DMatrix<f64>,
    linear: DVector<f64>,
    ineq: Vec<Row>,
    ineq_rhs: Vec<f64>,
    eq: Vec<Row>,
    eq_rhs: Vec<f64>,
}

impl Qp {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            hessian: DMatrix::zeros(n, n),
            linear: DVector::zeros(n),
            ineq: Vec::new(),
            ineq_rhs: Vec::new(),
            eq: Vec::new(),
            eq_rhs: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn num_ineq(&self) -> usize {
        self.ineq.len()
    }

    /// Adds `v` to `H[i][j]` and `H[j][i]` (once on the diagonal).
    pub fn add_hessian(&mut self, i: usize, j: usize, v: f64) {
        self.hessian[(i, j)] += v;
        if i != j {
            self.hessian[(j, i)] += v;
        }
    }

    pub fn add_linear(&mut self, i: usize, v: f64) {
        self.linear[i] += v;
    }

    /// Adds `w · (Σ coeffs·x + constant)²` to the objective (the ½ factor is
    /// absorbed so the term appears with weight exactly `w`).
    pub fn add_squared(&mut self, coeffs: &[(usize, f64)], constant: f64, w: f64) {
        for &(i, a) in coeffs {
            for &(j, b) in coeffs {
                self.hessian[(i, j)] += 2.0 * w * a * b;
            }
            self.linear[i] += 2.0 * w * a * constant;
        }
    }

    pub fn leq(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) {
        self.ineq.push(Row::new(coeffs));
        self.ineq_rhs.push(rhs);
    }

    pub fn eq(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) {
        self.eq.push(Row::new(coeffs));
        self.eq_rhs.push(rhs);
    }

    /// Box bound `lo ≤ x[i] ≤ hi`.
    pub fn bound(&mut self, i: usize, lo: f64, hi: f64) {
        self.leq(vec![(i, 1.0)], hi);
        self.leq(vec![(i, -1.0)], -lo);
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.hessian * x)) + self.linear.dot(x)
    }

    /// Largest violation `max(Gx − h, |Ex − f|)`, clamped below at zero.
    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        let mut worst: f64 = 0.0;
        for (row, &h) in self.ineq.iter().zip(&self.ineq_rhs) {
            worst = worst.max(row.dot(x) - h);
        }
        for (row, &f) in self.eq.iter().zip(&self.eq_rhs) {
            worst = worst.max((row.dot(x) - f).abs());
        }
        worst
    }

    pub fn solve(&self) -> Result<QpSolution, QpError> {
        self.solve_with(&QpSettings::default())
    }

    pub fn solve_with(&self, settings: &QpSettings) -> Result<QpSolution, QpError> {
        match self.interior_point(settings) {
            Ok(sol) => Ok(sol),
            Err(QpError::NotConverged) | Err(QpError::Singular) => {
                if self.phase_one_infeasible(settings) {
                    Err(QpError::Infeasible)
                } else {
                    Err(QpError::NotConverged)
                }
            }
            Err(e) => Err(e),
        }
    }

    /// Minimizes the uniform slack `τ` needed to satisfy all rows; reports
    /// infeasibility when the optimum exceeds a small threshold.
    fn phase_one_infeasible(&self, settings: &QpSettings) -> bool {
        let n = self.n + 1;
        let mut lp = Qp::new(n);
        lp.linear[self.n] = 1.0;
        lp.hessian[(self.n, self.n)] = 1e-8;
        for (row, &h) in self.ineq.iter().zip(&self.ineq_rhs) {
            let mut c = row.coeffs.clone();
            c.push((self.n, -1.0));
            lp.leq(c, h);
        }
        for (row, &f) in self.eq.iter().zip(&self.eq_rhs) {
            let mut c = row.coeffs.clone();
            c.push((self.n, -1.0));
            lp.leq(c.clone(), f);
            let neg: Vec<(usize, f64)> = row
                .coeffs
                .iter()
                .map(|&(i, v)| (i, -v))
                .chain(std::iter::once((self.n, -1.0)))
                .collect();
            lp.leq(neg, -f);
        }
        lp.leq(vec![(self.n, -1.0)], 0.0);
        for i in 0..self.n {
            lp.bound(i, -1e6, 1e6);
        }
        match lp.interior_point(settings) {
            Ok(sol) => sol.x[self.n] > 1e-7,
            Err(_) => false,
        }
    }

    fn interior_point(&self, settings: &QpSettings) -> Result<QpSolution, QpError> {
        let n = self.n;
        let m = self.ineq.len();
        let p = self.eq.len();
        let h = DVector::from_vec(self.ineq_rhs.clone());
        let f = DVector::from_vec(self.eq_rhs.clone());

        let g = dense_rows(&self.ineq, n);
        let e = dense_rows(&self.eq, n);
        let g_mul = |x: &DVector<f64>| -> DVector<f64> { &g * x };
        let gt_mul = |z: &DVector<f64>| -> DVector<f64> { g.tr_mul(z) };
        let e_mul = |x: &DVector<f64>| -> DVector<f64> { &e * x };
        let et_mul = |y: &DVector<f64>| -> DVector<f64> { e.tr_mul(y) };

        let scale_c = 1.0 + self.linear.amax();
        let scale_h = 1.0 + if m > 0 { h.amax() } else { 0.0 };
        let scale_f = 1.0 + if p > 0 { f.amax() } else { 0.0 };

        let mut x = DVector::zeros(n);
        let gx = g_mul(&x);
        let mut s = DVector::from_iterator(m, (0..m).map(|k| (h[k] - gx[k]).max(1.0)));
        let mut z = DVector::from_element(m, 1.0);
        let mut y = DVector::zeros(p);
        let mut best: Option<(f64, QpSolution)> = None;

        for iter in 0..settings.max_iterations {
            let hx = &self.hessian * &x;
            let gtz = gt_mul(&z);
            let ety = et_mul(&y);
            let gx = g_mul(&x);
            let ex = e_mul(&x);
            // Residuals are judged against the size of the terms they cancel.
            let dual_scale = scale_c.max(hx.amax()).max(gtz.amax()).max(ety.amax());
            let primal_scale = scale_h.max(gx.amax());
            let eq_scale = scale_f.max(ex.amax());
            let r_d = hx + &self.linear + gtz + ety;
            let r_p = gx + &s - &h;
            let r_e = ex - &f;
            let mu = if m > 0 { s.dot(&z) / m as f64 } else { 0.0 };

            let dual_ok = r_d.amax() <= settings.feasibility_tol * dual_scale;
            let primal_ok = m == 0 || r_p.amax() <= settings.feasibility_tol * primal_scale;
            let eq_ok = p == 0 || r_e.amax() <= settings.feasibility_tol * eq_scale;
            if dual_ok && primal_ok && eq_ok && mu <= settings.gap_tol {
                return Ok(QpSolution {
                    objective: self.objective(&x),
                    x,
                    iterations: iter,
                    ineq_duals: z,
                });
            }
            // With degenerate active rows the reduced KKT system becomes
            // ill-conditioned and the dual residual stalls or drifts while
            // primal feasibility and the gap stay exact. Keep the best such
            // iterate and return it once the gap has collapsed.
            if m > 0 && primal_ok && eq_ok && mu <= settings.gap_tol {
                let rel = r_d.amax() / dual_scale;
                if best.as_ref().map_or(true, |b: &(f64, QpSolution)| rel < b.0) {
                    best = Some((
                        rel,
                        QpSolution {
                            objective: self.objective(&x),
                            x: x.clone(),
                            iterations: iter,
                            ineq_duals: z.clone(),
                        },
                    ));
                }
                if mu <= settings.gap_tol * 1e-6 {
                    break;
                }
            }
            if m > 0 && z.amax() > 1e14 {
                break;
            }

            let w = DVector::from_iterator(m, (0..m).map(|k| z[k] / s[k]));
            let kkt = self.factorize(&g, &w)?;

            // Predictor.
            let r_c_aff = s.component_mul(&z);
            let (dx_a, _dy_a, ds_a, dz_a) =
                self.newton_direction(&kkt, &w, &s, &r_d, &r_p, &r_e, &r_c_aff, &g_mul, &gt_mul);
            let alpha_aff = step_to_boundary(&s, &ds_a).min(step_to_boundary(&z, &dz_a));
            let _ = dx_a;
            let sigma = if m > 0 {
                let mu_aff = (&s + alpha_aff * &ds_a).dot(&(&z + alpha_aff * &dz_a)) / m as f64;
                (mu_aff / mu).powi(3).clamp(0.0, 1.0)
            } else {
                0.0
            };

            // Corrector.
            let r_c = DVector::from_iterator(
                m,
                (0..m).map(|k| s[k] * z[k] + ds_a[k] * dz_a[k] - sigma * mu),
            );
            let (dx, dy, ds, dz) =
                self.newton_direction(&kkt, &w, &s, &r_d, &r_p, &r_e, &r_c, &g_mul, &gt_mul);
            let alpha = (0.99 * step_to_boundary(&s, &ds).min(step_to_boundary(&z, &dz))).min(1.0);

            x += alpha * dx;
            y += alpha * dy;
            s += alpha * ds;
            z += alpha * dz;
        }
        match best {
            Some((rel, sol)) if rel <= STALLED_DUAL_TOL => Ok(sol),
            _ => Err(QpError::NotConverged),
        }
    }

    fn factorize(&self, g: &DMatrix<f64>, w: &DVector<f64>) -> Result<Kkt, QpError> {
        let n = self.n;
        let p = self.eq.len();
        let mut wg = g.clone();
        for (mut row, &wk) in wg.row_iter_mut().zip(w.iter()) {
            row *= wk;
        }
        let mut k = self.hessian.clone();
        k.gemm_tr(1.0, g, &wg, 1.0);
        if p == 0 {
            if let Some(ch) = k.clone().cholesky() {
                return Ok(Kkt::Cholesky(ch));
            }
        }
        // Only regularize when needed: a scaled shift would swamp small but
        // meaningful curvature once some barrier weights blow up.
        let reg = 1e-12 * (1.0 + k.diagonal().amax());
        for i in 0..n {
            k[(i, i)] += reg;
        }
        if p == 0 {
            return k
                .clone()
                .cholesky()
                .map(Kkt::Cholesky)
                .or_else(|| {
                    let lu = k.clone().lu();
                    if lu.is_invertible() {
                        Some(Kkt::Lu(lu))
                    } else {
                        None
                    }
                })
                .ok_or(QpError::Singular);
        }
        let mut full = DMatrix::zeros(n + p, n + p);
        full.view_mut((0, 0), (n, n)).copy_from(&k);
        for (r, row) in self.eq.iter().enumerate() {
            for &(i, v) in &row.coeffs {
                full[(n + r, i)] += v;
                full[(i, n + r)] += v;
            }
            full[(n + r, n + r)] = -1e-13;
        }
        let lu = full.lu();
        if !lu.is_invertible() {
            return Err(QpError::Singular);
        }
        Ok(Kkt::Lu(lu))
    }

    #[allow(clippy::too_many_arguments)]
    fn newton_direction(
        &self,
        kkt: &Kkt,
        w: &DVector<f64>,
        s: &DVector<f64>,
        r_d: &DVector<f64>,
        r_p: &DVector<f64>,
        r_e: &DVector<f64>,
        r_c: &DVector<f64>,
        g_mul: &dyn Fn(&DVector<f64>) -> DVector<f64>,
        gt_mul: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    ) -> (DVector<f64>, DVector<f64>, DVector<f64>, DVector<f64>) {
        let n = self.n;
        let p = self.eq.len();
        let m = self.ineq.len();
        // dz = −r_c/s + W r_p + W G dx
        let base = DVector::from_iterator(m, (0..m).map(|k| -r_c[k] / s[k] + w[k] * r_p[k]));
        let rhs_x = -r_d - gt_mul(&base);
        let (dx, dy) = match kkt {
            Kkt::Cholesky(ch) => (ch.solve(&rhs_x), DVector::zeros(0)),
            Kkt::Lu(lu) => {
                let mut rhs = DVector::zeros(n + p);
                rhs.rows_mut(0, n).copy_from(&rhs_x);
                rhs.rows_mut(n, p).copy_from(&(-r_e));
                let sol = lu.solve(&rhs).unwrap_or_else(|| DVector::zeros(n + p));
                (sol.rows(0, n).into_owned(), sol.rows(n, p).into_owned())
            }
        };
        let gdx = g_mul(&dx);
        let ds = -r_p - &gdx;
        let dz = DVector::from_iterator(m, (0..m).map(|k| base[k] + w[k] * gdx[k]));
        (dx, dy, ds, dz)
    }
}

enum Kkt {
    Cholesky(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

fn dense_rows(rows: &[Row], n: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(rows.len(), n);
    for (k, row) in rows.iter().enumerate() {
        for &(i, v) in &row.coeffs {
            out[(k, i)] += v;
        }
    }
    out
}

fn step_to_boundary(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    let mut alpha: f64 = 1.0;
    for (a, d) in v.iter().zip(dv.iter()) {
        if *d < 0.0 {
            alpha = alpha.min(-a / d);
        }
    }
    alpha
}
