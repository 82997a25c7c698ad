//! Dense strictly convex quadratic programming by the Goldfarb-Idnani dual
//! active-set method.
//!
//! Solves `min ½xᵀGx + cᵀx` subject to `A_eq·x = b_eq` and `A_in·x ≥ b_in`
//! with `G` positive definite. The dual method starts from the unconstrained
//! minimizer and adds violated constraints one at a time, so every iterate
//! is dual feasible and infeasibility is detected exactly when a violated
//! constraint cannot be added.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct QpProblem {
    pub hessian: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub eq_matrix: DMatrix<f64>,
    pub eq_rhs: DVector<f64>,
    pub ineq_matrix: DMatrix<f64>,
    pub ineq_rhs: DVector<f64>,
}

impl QpProblem {
    pub fn new(hessian: DMatrix<f64>, linear: DVector<f64>) -> Self {
        let n = linear.len();
        Self {
            hessian,
            linear,
            eq_matrix: DMatrix::zeros(0, n),
            eq_rhs: DVector::zeros(0),
            ineq_matrix: DMatrix::zeros(0, n),
            ineq_rhs: DVector::zeros(0),
        }
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn with_equalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.eq_matrix = a;
        self.eq_rhs = b;
        self
    }

    pub fn with_inequalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.ineq_matrix = a;
        self.ineq_rhs = b;
        self
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.hessian * x)) + self.linear.dot(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpOptions {
    /// Primal feasibility tolerance, scaled by the constraint row norm.
    pub feasibility_tol: f64,
    /// Tolerance on the stationarity residual reported in the solution.
    pub kkt_tol: f64,
    pub max_iterations: usize,
}

impl Default for QpOptions {
    fn default() -> Self {
        Self { feasibility_tol: 1e-9, kkt_tol: 1e-6, max_iterations: 2000 }
    }
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub objective: f64,
    /// Multipliers of the equality rows.
    pub eq_multipliers: DVector<f64>,
    /// Multipliers of the inequality rows (zero for inactive ones).
    pub ineq_multipliers: DVector<f64>,
    /// Inequality rows in the final active set.
    pub active: Vec<usize>,
    pub iterations: usize,
    /// Max-norm of the KKT residual (stationarity, primal and dual feasibility).
    pub kkt_residual: f64,
}

impl QpSolution {
    pub fn converged(&self, options: &QpOptions) -> bool {
        self.kkt_residual <= options.kkt_tol
    }
}

/// Identifies a constraint row: equality rows first, then inequality rows.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Row {
    Eq(usize, f64),
    Ineq(usize),
}

struct Factors {
    /// `J = L⁻ᵀ·Q`; the first `q` columns span the active constraint normals.
    j: DMatrix<f64>,
    /// Upper-triangular `R` with `Jᵀ·N_active = [R; 0]`.
    r: DMatrix<f64>,
    q: usize,
}

fn givens(a: f64, b: f64) -> (f64, f64, f64) {
    if b == 0.0 {
        return (1.0, 0.0, a);
    }
    let h = a.hypot(b);
    (a / h, b / h, h)
}

impl Factors {
    /// `d = Jᵀ·n`.
    fn project(&self, n: &DVector<f64>) -> DVector<f64> {
        self.j.tr_mul(n)
    }

    /// `z = J2·d2` (primal direction) and `r = R⁻¹·d1` (dual direction).
    fn directions(&self, d: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let n = d.len();
        let q = self.q;
        let mut z = DVector::zeros(n);
        for k in q..n {
            if d[k] != 0.0 {
                z.axpy(d[k], &self.j.column(k), 1.0);
            }
        }
        let mut r = DVector::zeros(q);
        for i in (0..q).rev() {
            let mut v = d[i];
            for k in i + 1..q {
                v -= self.r[(i, k)] * r[k];
            }
            r[i] = v / self.r[(i, i)];
        }
        (z, r)
    }

    fn rotate_columns(&mut self, i: usize, c: f64, s: f64) {
        let n = self.j.nrows();
        for row in 0..n {
            let a = self.j[(row, i)];
            let b = self.j[(row, i + 1)];
            self.j[(row, i)] = c * a + s * b;
            self.j[(row, i + 1)] = -s * a + c * b;
        }
    }

    /// Append a constraint with projected normal `d`. Returns false when the
    /// normal is linearly dependent on the active set.
    fn add(&mut self, mut d: DVector<f64>) -> bool {
        let n = d.len();
        let q = self.q;
        for k in (q + 1..n).rev() {
            let (c, s, h) = givens(d[k - 1], d[k]);
            if s == 0.0 {
                continue;
            }
            d[k - 1] = h;
            d[k] = 0.0;
            self.rotate_columns(k - 1, c, s);
        }
        let scale = d.iter().take(q + 1).fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
        if d[q].abs() <= 1e-13 * scale {
            return false;
        }
        for i in 0..=q {
            self.r[(i, q)] = d[i];
        }
        self.q += 1;
        true
    }

    /// Remove the active constraint at position `k` and restore triangularity.
    fn drop(&mut self, k: usize) {
        let q = self.q;
        for col in k..q - 1 {
            for row in 0..q {
                self.r[(row, col)] = self.r[(row, col + 1)];
            }
        }
        for row in 0..q {
            self.r[(row, q - 1)] = 0.0;
        }
        for i in k..q - 1 {
            let (c, s, h) = givens(self.r[(i, i)], self.r[(i + 1, i)]);
            if s == 0.0 {
                continue;
            }
            self.r[(i, i)] = h;
            self.r[(i + 1, i)] = 0.0;
            for col in i + 1..q - 1 {
                let a = self.r[(i, col)];
                let b = self.r[(i + 1, col)];
                self.r[(i, col)] = c * a + s * b;
                self.r[(i + 1, col)] = -s * a + c * b;
            }
            self.rotate_columns(i, c, s);
        }
        self.q -= 1;
    }
}

pub fn solve(problem: &QpProblem, options: &QpOptions) -> Result<QpSolution> {
    let n = problem.dim();
    let (me, mi) = (problem.eq_matrix.nrows(), problem.ineq_matrix.nrows());
    if problem.hessian.shape() != (n, n)
        || problem.eq_matrix.ncols() != n
        || problem.ineq_matrix.ncols() != n
        || problem.eq_rhs.len() != me
        || problem.ineq_rhs.len() != mi
    {
        return Err(Error::dims("QP matrices have inconsistent shapes"));
    }
    let g = problem.hessian.clone();
    let chol = g
        .clone()
        .cholesky()
        .ok_or_else(|| Error::dims("QP Hessian is not positive definite"))?;
    let l = chol.l();
    // J = L⁻ᵀ
    let l_inv = l
        .clone()
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .ok_or_else(|| Error::dims("QP Hessian factor is singular"))?;
    let mut f = Factors { j: l_inv.transpose(), r: DMatrix::zeros(n, n), q: 0 };

    let mut x = -chol.solve(&problem.linear);
    let eq_norm: Vec<f64> = (0..me).map(|i| problem.eq_matrix.row(i).norm().max(1e-300)).collect();
    let in_norm: Vec<f64> = (0..mi).map(|i| problem.ineq_matrix.row(i).norm().max(1e-300)).collect();

    let normal = |row: Row| -> DVector<f64> {
        match row {
            Row::Eq(i, sign) => problem.eq_matrix.row(i).transpose() * sign,
            Row::Ineq(i) => problem.ineq_matrix.row(i).transpose(),
        }
    };
    let slack = |row: Row, x: &DVector<f64>| -> f64 {
        match row {
            Row::Eq(i, sign) => sign * (problem.eq_matrix.row(i).dot(&x.transpose()) - problem.eq_rhs[i]),
            Row::Ineq(i) => problem.ineq_matrix.row(i).dot(&x.transpose()) - problem.ineq_rhs[i],
        }
    };

    let mut active: Vec<Row> = Vec::new();
    let mut mult: Vec<f64> = Vec::new();
    let mut is_active = vec![false; mi];
    let mut iterations = 0;
    let mut pending_eq: Vec<usize> = (0..me).collect();
    pending_eq.reverse();

    loop {
        // Step 1: pick the next constraint to add.
        let p = if let Some(i) = pending_eq.pop() {
            let s = problem.eq_matrix.row(i).dot(&x.transpose()) - problem.eq_rhs[i];
            Row::Eq(i, if s > 0.0 { -1.0 } else { 1.0 })
        } else {
            let mut worst: Option<(usize, f64)> = None;
            for i in 0..mi {
                if is_active[i] {
                    continue;
                }
                let s = slack(Row::Ineq(i), &x) / in_norm[i];
                if s < -options.feasibility_tol && worst.is_none_or(|(_, w)| s < w) {
                    worst = Some((i, s));
                }
            }
            match worst {
                Some((i, _)) => Row::Ineq(i),
                None => break,
            }
        };
        let np = normal(p);
        let mut u_new = 0.0;

        // Step 2: move towards satisfying constraint p.
        loop {
            iterations += 1;
            if iterations > options.max_iterations {
                return Err(Error::Infeasible { branch: None, detail: "QP iteration limit reached".into() });
            }
            let sp = slack(p, &x);
            let d = f.project(&np);
            let (z, r) = f.directions(&d);
            let ztn = z.dot(&np);
            let row_scale = match p {
                Row::Eq(i, _) => eq_norm[i],
                Row::Ineq(i) => in_norm[i],
            };
            let full_ok = ztn > 1e-14 * row_scale * row_scale;

            if let Row::Eq(..) = p {
                if !full_ok && sp.abs() <= options.feasibility_tol * row_scale {
                    // redundant equality already satisfied
                    break;
                }
            }

            // Partial (dual) step: largest step keeping active inequality multipliers ≥ 0.
            let mut t1 = f64::INFINITY;
            let mut drop_at = None;
            for (k, row) in active.iter().enumerate() {
                if let Row::Ineq(_) = row {
                    if r[k] > 0.0 {
                        let t = mult[k] / r[k];
                        if t < t1 {
                            t1 = t;
                            drop_at = Some(k);
                        }
                    }
                }
            }
            let t2 = if full_ok { -sp / ztn } else { f64::INFINITY };
            let t = t1.min(t2);
            if !t.is_finite() {
                let detail = match p {
                    Row::Eq(i, _) => format!("equality row {i} cannot be satisfied"),
                    Row::Ineq(i) => format!("inequality row {i} cannot be satisfied"),
                };
                return Err(Error::Infeasible { branch: None, detail });
            }
            for k in 0..active.len() {
                mult[k] -= t * r[k];
            }
            u_new += t;
            if full_ok {
                x.axpy(t, &z, 1.0);
            }
            if full_ok && t2 <= t1 {
                if !f.add(d) {
                    return Err(Error::Infeasible { branch: None, detail: "degenerate constraint set".into() });
                }
                active.push(p);
                mult.push(u_new);
                if let Row::Ineq(i) = p {
                    is_active[i] = true;
                }
                break;
            }
            let k = drop_at.expect("partial step implies a droppable constraint");
            if let Row::Ineq(i) = active[k] {
                is_active[i] = false;
            }
            active.remove(k);
            mult.remove(k);
            f.drop(k);
        }
    }

    let mut eq_multipliers = DVector::zeros(me);
    let mut ineq_multipliers = DVector::zeros(mi);
    let mut active_rows = Vec::new();
    for (row, &u) in active.iter().zip(&mult) {
        match *row {
            Row::Eq(i, sign) => eq_multipliers[i] = sign * u,
            Row::Ineq(i) => {
                ineq_multipliers[i] = u;
                active_rows.push(i);
            }
        }
    }
    active_rows.sort_unstable();

    let grad = &g * &x + &problem.linear
        - problem.eq_matrix.tr_mul(&eq_multipliers)
        - problem.ineq_matrix.tr_mul(&ineq_multipliers);
    let scale = 1.0 + problem.linear.amax() + (&g * &x).amax();
    let mut kkt = grad.amax() / scale;
    for i in 0..me {
        kkt = kkt.max((problem.eq_matrix.row(i).dot(&x.transpose()) - problem.eq_rhs[i]).abs() / eq_norm[i]);
    }
    for i in 0..mi {
        kkt = kkt.max((-slack(Row::Ineq(i), &x) / in_norm[i]).max(0.0));
        kkt = kkt.max((-ineq_multipliers[i]).max(0.0));
    }
    Ok(QpSolution {
        objective: problem.objective(&x),
        x,
        eq_multipliers,
        ineq_multipliers,
        active: active_rows,
        iterations,
        kkt_residual: kkt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unconstrained_minimum() {
        let p = QpProblem::new(DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]), DVector::from_vec(vec![-2.0, -4.0]));
        let s = solve(&p, &QpOptions::default()).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-12 && (s.x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn textbook_problem() {
        // min x1² + x2² - 2x1 - 5x2 s.t. x1 - 2x2 ≥ -2, -x1 - 2x2 ≥ -6, -x1 + 2x2 ≥ -2, x ≥ 0
        let g = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0]);
        let c = DVector::from_vec(vec![-2.0, -5.0]);
        let a = DMatrix::from_row_slice(5, 2, &[1.0, -2.0, -1.0, -2.0, -1.0, 2.0, 1.0, 0.0, 0.0, 1.0]);
        let b = DVector::from_vec(vec![-2.0, -6.0, -2.0, 0.0, 0.0]);
        let s = solve(&QpProblem::new(g, c).with_inequalities(a, b), &QpOptions::default()).unwrap();
        assert!((s.x[0] - 1.4).abs() < 1e-10 && (s.x[1] - 1.7).abs() < 1e-10, "{:?}", s.x);
        assert_eq!(s.active, vec![0]);
        assert!(s.kkt_residual < 1e-9);
    }

    #[test]
    fn equality_and_bounds() {
        // min ½‖x‖² s.t. x1 + x2 + x3 = 3, x1 ≤ 0.5
        let p = QpProblem::new(DMatrix::identity(3, 3), DVector::zeros(3))
            .with_equalities(DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]), DVector::from_vec(vec![3.0]))
            .with_inequalities(DMatrix::from_row_slice(1, 3, &[-1.0, 0.0, 0.0]), DVector::from_vec(vec![-0.5]));
        let s = solve(&p, &QpOptions::default()).unwrap();
        assert!((s.x[0] - 0.5).abs() < 1e-12);
        assert!((s.x[1] - 1.25).abs() < 1e-12 && (s.x[2] - 1.25).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasibility() {
        let p = QpProblem::new(DMatrix::identity(1, 1), DVector::zeros(1))
            .with_inequalities(DMatrix::from_row_slice(2, 1, &[1.0, -1.0]), DVector::from_vec(vec![1.0, 0.0]));
        assert!(matches!(solve(&p, &QpOptions::default()), Err(Error::Infeasible { .. })));
    }
}
