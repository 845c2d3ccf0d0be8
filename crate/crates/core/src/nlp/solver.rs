use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::problem::{central_difference, fd_step, NlpProblem};
use crate::error::{Error, Result};

/// Barrier schedule and line-search knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverOptions {
    /// Initial barrier weight.
    pub mu0: f64,
    /// Factor applied to the barrier weight after each outer stage.
    pub mu_shrink: f64,
    /// Weight of the last outer stage.
    pub mu_min: f64,
    /// Armijo sufficient-increase constant.
    pub armijo_c: f64,
    /// Backtracking factor.
    pub step_shrink: f64,
    /// Stationarity tolerance; an inner loop stops once the squared Newton
    /// decrement drops below `grad_tol^2`.
    pub grad_tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Keep every accepted iterate in [`NlpSolution::iterates`].
    pub record_iterates: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            mu0: 1.0,
            mu_shrink: 0.1,
            mu_min: 1e-8,
            armijo_c: 1e-4,
            step_shrink: 0.5,
            grad_tol: 1e-6,
            max_outer: 50,
            max_inner: 100,
            record_iterates: false,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> std::result::Result<(), String> {
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(format!("{name} must lie in (0, 1), got {v}"))
            }
        };
        unit("mu_shrink", self.mu_shrink)?;
        unit("armijo_c", self.armijo_c)?;
        unit("step_shrink", self.step_shrink)?;
        for (name, v) in [
            ("mu0", self.mu0),
            ("mu_min", self.mu_min),
            ("grad_tol", self.grad_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        if self.mu_min > self.mu0 {
            return Err("mu_min must not exceed mu0".into());
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return Err("iteration caps must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolveStatus {
    Converged,
    IterationCap,
    InfeasibleStart,
}

/// Terminal point of one outer (fixed barrier weight) stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BarrierStage {
    pub mu: f64,
    pub objective: f64,
    /// Objective plus barrier terms at this stage's weight.
    pub penalized: f64,
    pub max_constraint: f64,
    pub inner_iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NlpSolution {
    pub x: Vec<f64>,
    pub objective_value: f64,
    pub status: SolveStatus,
    pub trace: Vec<BarrierStage>,
    pub iterates: Vec<Vec<f64>>,
}

/// True if `x` is strictly inside every finite bound.
pub fn strictly_inside_box<P: NlpProblem + ?Sized>(problem: &P, x: &[f64]) -> bool {
    x.iter()
        .zip(problem.lower().iter().zip(problem.upper()))
        .all(|(x, (l, u))| x.is_finite() && *x > *l && *x < *u)
}

/// True if `x` satisfies every bound and constraint strictly.
pub fn is_strictly_interior<P: NlpProblem + ?Sized>(problem: &P, x: &[f64]) -> bool {
    if !strictly_inside_box(problem, x) {
        return false;
    }
    let mut g = vec![0.0; problem.num_constraints()];
    problem.constraints(x, &mut g);
    g.iter().all(|v| *v < 0.0)
}

struct Barrier<'a, P: NlpProblem + ?Sized> {
    problem: &'a P,
    n: usize,
    m: usize,
    g: Vec<f64>,
    jac: Vec<f64>,
    grad: Vec<f64>,
}

impl<'a, P: NlpProblem + ?Sized> Barrier<'a, P> {
    fn new(problem: &'a P) -> Self {
        let (n, m) = (problem.dim(), problem.num_constraints());
        Self {
            problem,
            n,
            m,
            g: vec![0.0; m],
            jac: vec![0.0; m * n],
            grad: vec![0.0; n],
        }
    }

    fn box_terms(&self, x: &[f64]) -> Option<f64> {
        let mut acc = 0.0;
        for (j, xj) in x.iter().enumerate() {
            let (l, u) = (self.problem.lower()[j], self.problem.upper()[j]);
            if l.is_finite() {
                let s = xj - l;
                if s <= 0.0 {
                    return None;
                }
                acc += s.ln();
            }
            if u.is_finite() {
                let s = u - xj;
                if s <= 0.0 {
                    return None;
                }
                acc += s.ln();
            }
        }
        Some(acc)
    }

    /// Penalized objective, or `None` outside the strict interior.
    fn value(&mut self, x: &[f64], mu: f64) -> Option<(f64, f64)> {
        let bx = self.box_terms(x)?;
        self.problem.constraints(x, &mut self.g);
        let mut logs = 0.0;
        for &gk in &self.g {
            if !(gk < 0.0) {
                return None;
            }
            logs += (-gk).ln();
        }
        let f = self.problem.objective(x);
        let phi = f + mu * (logs + bx);
        phi.is_finite().then_some((phi, f))
    }

    fn max_constraint(&mut self, x: &[f64]) -> f64 {
        self.problem.constraints(x, &mut self.g);
        self.g.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Gradient of `f + sum w_k g_k` into `out`.
    fn lagrangian_gradient(&mut self, x: &[f64], w: &[f64], out: &mut [f64]) {
        self.problem.gradient(x, out);
        self.problem.jacobian(x, &mut self.jac);
        for k in 0..self.m {
            let row = &self.jac[k * self.n..(k + 1) * self.n];
            for j in 0..self.n {
                out[j] += w[k] * row[j];
            }
        }
    }

    /// Gradient of the penalized objective and the (positive definite when
    /// well posed) negated Hessian.
    fn newton_system(&mut self, x: &[f64], mu: f64) -> (DVector<f64>, DMatrix<f64>) {
        let (n, m) = (self.n, self.m);
        self.problem.constraints(x, &mut self.g);
        let g = self.g.clone();
        self.problem.gradient(x, &mut self.grad);
        self.problem.jacobian(x, &mut self.jac);
        let jac = self.jac.clone();

        let mut grad = DVector::from_column_slice(&self.grad);
        let mut hess = DMatrix::<f64>::zeros(n, n);
        for k in 0..m {
            let row = &jac[k * n..(k + 1) * n];
            let inv = 1.0 / g[k];
            for a in 0..n {
                grad[a] += mu * row[a] * inv;
                if row[a] == 0.0 {
                    continue;
                }
                for b in 0..n {
                    hess[(a, b)] += mu * row[a] * row[b] * inv * inv;
                }
            }
        }
        let lower = self.problem.lower();
        let upper = self.problem.upper();
        for j in 0..n {
            if lower[j].is_finite() {
                let s = x[j] - lower[j];
                grad[j] += mu / s;
                hess[(j, j)] += mu / (s * s);
            }
            if upper[j].is_finite() {
                let s = upper[j] - x[j];
                grad[j] -= mu / s;
                hess[(j, j)] += mu / (s * s);
            }
        }

        // Curvature of f + sum w_k g_k by differencing analytic gradients.
        let w: Vec<f64> = g.iter().map(|gk| mu / gk).collect();
        let mut y = x.to_vec();
        let mut gp = vec![0.0; n];
        let mut gm = vec![0.0; n];
        for j in 0..n {
            let mut h = 1e-5 * x[j].abs().max(1e-3);
            for gap in [x[j] - lower[j], upper[j] - x[j]] {
                if gap.is_finite() {
                    h = h.min(0.5 * gap);
                }
            }
            y[j] = x[j] + h;
            let hp = y[j] - x[j];
            self.lagrangian_gradient(&y, &w, &mut gp);
            y[j] = x[j] - h;
            let hm = x[j] - y[j];
            self.lagrangian_gradient(&y, &w, &mut gm);
            y[j] = x[j];
            for a in 0..n {
                hess[(a, j)] -= (gp[a] - gm[a]) / (hp + hm);
            }
        }
        let sym = (&hess + hess.transpose()) * 0.5;
        (grad, sym)
    }
}

/// Solves `H d = g` with `H` shifted until its Cholesky factor exists.
fn regularized_solve(h: &DMatrix<f64>, g: &DVector<f64>) -> DVector<f64> {
    if let Some(ch) = h.clone().cholesky() {
        return ch.solve(g);
    }
    let n = h.nrows();
    let scale = (0..n).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1e-12);
    let mut shift = 1e-10 * scale;
    loop {
        let shifted = h + DMatrix::<f64>::identity(n, n) * shift;
        if let Some(ch) = shifted.cholesky() {
            return ch.solve(g);
        }
        shift *= 10.0;
        if !shift.is_finite() {
            return g.clone();
        }
    }
}

type StopRule<'s> = &'s dyn Fn(&[f64], f64) -> bool;

fn barrier_ascent<P: NlpProblem + ?Sized>(
    problem: &P,
    x0: &[f64],
    opts: &SolverOptions,
    stop: Option<StopRule<'_>>,
) -> NlpSolution {
    let n = problem.dim();
    let mut bar = Barrier::new(problem);
    let mut x = x0.to_vec();
    let mut trace = Vec::new();
    let mut iterates = Vec::new();
    let mut mu = opts.mu0;
    let mut last_converged = false;
    let mut reached_min = false;
    let mut stopped = false;

    'outer: for _ in 0..opts.max_outer {
        let mut converged = false;
        let mut inner = 0;
        let (mut phi, _) = match bar.value(&x, mu) {
            Some(v) => v,
            None => break,
        };
        while inner < opts.max_inner {
            inner += 1;
            let (grad, hess) = bar.newton_system(&x, mu);
            let dir = regularized_solve(&hess, &grad);
            let decrement = grad.dot(&dir);
            if !decrement.is_finite() {
                break;
            }
            if decrement <= opts.grad_tol * opts.grad_tol {
                converged = true;
                break;
            }
            // Largest step keeping strict box interiority.
            let mut alpha: f64 = 1.0;
            for j in 0..n {
                let (l, u) = (problem.lower()[j], problem.upper()[j]);
                if dir[j] < 0.0 && l.is_finite() {
                    alpha = alpha.min(0.995 * (x[j] - l) / -dir[j]);
                } else if dir[j] > 0.0 && u.is_finite() {
                    alpha = alpha.min(0.995 * (u - x[j]) / dir[j]);
                }
            }
            let slope = decrement.max(0.0);
            let mut trial = vec![0.0; n];
            let mut accepted = None;
            for _ in 0..80 {
                for j in 0..n {
                    trial[j] = x[j] + alpha * dir[j];
                }
                if let Some((v, _)) = bar.value(&trial, mu) {
                    if v >= phi + opts.armijo_c * alpha * slope {
                        accepted = Some(v);
                        break;
                    }
                }
                alpha *= opts.step_shrink;
            }
            let Some(v) = accepted else {
                // No ascent possible at working precision.
                converged = decrement <= opts.grad_tol;
                break;
            };
            x.copy_from_slice(&trial);
            phi = v;
            if opts.record_iterates {
                iterates.push(x.clone());
            }
            if let Some(rule) = stop {
                let gmax = bar.max_constraint(&x);
                if rule(&x, gmax) {
                    stopped = true;
                    converged = true;
                    break;
                }
            }
        }
        let objective = problem.objective(&x);
        let max_constraint = bar.max_constraint(&x);
        trace.push(BarrierStage {
            mu,
            objective,
            penalized: phi,
            max_constraint,
            inner_iterations: inner,
            converged,
        });
        last_converged = converged;
        if stopped {
            break 'outer;
        }
        if mu <= opts.mu_min * (1.0 + 1e-12) {
            reached_min = true;
            break;
        }
        mu = (mu * opts.mu_shrink).max(opts.mu_min);
    }

    let status = if (reached_min || stopped) && last_converged {
        SolveStatus::Converged
    } else {
        SolveStatus::IterationCap
    };
    let objective_value = problem.objective(&x);
    NlpSolution {
        x,
        objective_value,
        status,
        trace,
        iterates,
    }
}

/// Maximizes `problem` from `x0` with a log-barrier method.
///
/// Inner iterations are damped Newton steps on the penalized objective with
/// Armijo backtracking; any trial point outside the strict interior is
/// rejected. If `x0` is not strictly interior a phase-I search runs first.
/// The returned objective is never below `objective(x0) - grad_tol`.
pub fn solve<P: NlpProblem + ?Sized>(problem: &P, x0: &[f64], opts: &SolverOptions) -> NlpSolution {
    assert_eq!(x0.len(), problem.dim(), "starting point has wrong dimension");
    let start = if is_strictly_interior(problem, x0) {
        x0.to_vec()
    } else {
        match find_interior_point(problem, x0, opts) {
            Ok(x) => x,
            Err(_) => {
                return NlpSolution {
                    x: x0.to_vec(),
                    objective_value: problem.objective(x0),
                    status: SolveStatus::InfeasibleStart,
                    trace: Vec::new(),
                    iterates: Vec::new(),
                }
            }
        }
    };
    let mut sol = barrier_ascent(problem, &start, opts, None);
    let f0 = problem.objective(&start);
    if !(sol.objective_value >= f0 - opts.grad_tol) {
        sol.x = start;
        sol.objective_value = f0;
    }
    sol
}

/// Phase-I: maximize `-s - rho * sum_j w_j (x_j - a_j)^2` subject to
/// `g_k(x) <= s`. The proximal term keeps coordinates that need not move
/// close to the anchor `a`.
struct PhaseOne<'a, P: NlpProblem + ?Sized> {
    inner: &'a P,
    lower: Vec<f64>,
    upper: Vec<f64>,
    anchor: Vec<f64>,
    weight: Vec<f64>,
    rho: f64,
}

impl<P: NlpProblem + ?Sized> NlpProblem for PhaseOne<'_, P> {
    fn dim(&self) -> usize {
        self.inner.dim() + 1
    }
    fn lower(&self) -> &[f64] {
        &self.lower
    }
    fn upper(&self) -> &[f64] {
        &self.upper
    }
    fn num_constraints(&self) -> usize {
        self.inner.num_constraints()
    }
    fn objective(&self, x: &[f64]) -> f64 {
        let n = self.anchor.len();
        let prox: f64 = (0..n)
            .map(|j| self.weight[j] * (x[j] - self.anchor[j]).powi(2))
            .sum();
        -x[n] - self.rho * prox
    }
    fn constraints(&self, x: &[f64], out: &mut [f64]) {
        let (head, s) = x.split_at(x.len() - 1);
        self.inner.constraints(head, out);
        for o in out.iter_mut() {
            *o -= s[0];
        }
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let n = self.anchor.len();
        for j in 0..n {
            out[j] = -2.0 * self.rho * self.weight[j] * (x[j] - self.anchor[j]);
        }
        out[n] = -1.0;
    }
    fn jacobian(&self, x: &[f64], out: &mut [f64]) {
        let n = self.inner.dim();
        let m = self.inner.num_constraints();
        let mut inner = vec![0.0; m * n];
        self.inner.jacobian(&x[..n], &mut inner);
        for k in 0..m {
            out[k * (n + 1)..k * (n + 1) + n].copy_from_slice(&inner[k * n..(k + 1) * n]);
            out[k * (n + 1) + n] = -1.0;
        }
    }
    fn analytic_derivatives(&self) -> bool {
        self.inner.analytic_derivatives()
    }
}

/// Slack a phase-I search must reach before it hands back a point.
const PHASE_ONE_MARGIN: f64 = 1e-4;
const PHASE_ONE_MU_FACTOR: f64 = 1e-4;
/// Proximal weights tried in turn; the last one drops the anchor.
const PHASE_ONE_PROXIMAL: [f64; 3] = [1.0, 1e-2, 0.0];

/// Returns a strictly interior point, starting from `hint`.
///
/// An already interior hint is returned unchanged. Otherwise the hint is
/// pulled inside the box and the minimum constraint slack is maximized until
/// every constraint clears a small margin.
pub fn find_interior_point<P: NlpProblem + ?Sized>(
    problem: &P,
    hint: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<f64>> {
    let n = problem.dim();
    assert_eq!(hint.len(), n, "hint has wrong dimension");
    if is_strictly_interior(problem, hint) {
        return Ok(hint.to_vec());
    }
    let mut x = hint.to_vec();
    for j in 0..n {
        let (l, u) = (problem.lower()[j], problem.upper()[j]);
        if !(l < u) {
            return Err(Error::InfeasibleStart {
                max_violation: f64::INFINITY,
            });
        }
        let width = if l.is_finite() && u.is_finite() {
            u - l
        } else {
            1.0
        };
        let pad = 1e-3 * width;
        if !x[j].is_finite() {
            x[j] = if l.is_finite() { l + pad } else if u.is_finite() { u - pad } else { 0.0 };
        }
        if l.is_finite() && x[j] <= l {
            x[j] = l + pad;
        }
        if u.is_finite() && x[j] >= u {
            x[j] = u - pad;
        }
    }
    let m = problem.num_constraints();
    let mut g = vec![0.0; m];
    problem.constraints(&x, &mut g);
    let gmax = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if gmax < 0.0 || m == 0 {
        return Ok(x);
    }
    if !gmax.is_finite() {
        return Err(Error::InfeasibleStart { max_violation: gmax });
    }

    let floor = -gmax.abs().max(1.0);
    let mut lower = problem.lower().to_vec();
    lower.push(floor);
    let mut upper = problem.upper().to_vec();
    upper.push(f64::INFINITY);
    let weight = (0..n)
        .map(|j| {
            let (l, u) = (problem.lower()[j], problem.upper()[j]);
            let w = if l.is_finite() && u.is_finite() {
                u - l
            } else {
                x[j].abs().max(1.0)
            };
            1.0 / (w * w)
        })
        .collect();
    let mut phase = PhaseOne {
        inner: problem,
        lower,
        upper,
        anchor: x.clone(),
        weight,
        rho: 0.0,
    };
    let mut z = x.clone();
    z.push(gmax + 0.1 * gmax.abs().max(1e-2));
    let margin = PHASE_ONE_MARGIN.min(0.5 * floor.abs());
    // Phase constraints are g_k - s, so the original maximum is gmax + s.
    let rule = |z: &[f64], gmax: f64| gmax + z[n] <= -margin;
    // A small barrier weight keeps the search close to the hint; it stops as
    // soon as the margin is cleared.
    let phase_opts = SolverOptions {
        mu0: (opts.mu0 * PHASE_ONE_MU_FACTOR).max(opts.mu_min),
        ..*opts
    };
    let mut worst = gmax;
    for rho in PHASE_ONE_PROXIMAL {
        phase.rho = rho;
        let sol = barrier_ascent(&phase, &z, &phase_opts, Some(&rule));
        let cand = &sol.x[..n];
        problem.constraints(cand, &mut g);
        worst = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if worst < 0.0 && strictly_inside_box(problem, cand) {
            return Ok(cand.to_vec());
        }
    }
    Err(Error::InfeasibleStart {
        max_violation: worst,
    })
}

/// Worst relative disagreement between the analytic derivatives of `problem`
/// and central differences with step `1e-6 max(1, |x_j|)`.
///
/// The error of an entry is `|a - d| / max(1, |a|, |d|)`.
pub fn check_gradient<P: NlpProblem + ?Sized>(problem: &P, x: &[f64]) -> f64 {
    let (n, m) = (problem.dim(), problem.num_constraints());
    let rel = |a: f64, d: f64| (a - d).abs() / 1f64.max(a.abs()).max(d.abs());
    let mut worst: f64 = 0.0;

    let mut grad = vec![0.0; n];
    problem.gradient(x, &mut grad);
    let mut y = x.to_vec();
    for j in 0..n {
        let d = central_difference(&mut y, j, fd_step(x[j]), |z| problem.objective(z));
        worst = worst.max(rel(grad[j], d));
    }

    if m > 0 {
        let mut jac = vec![0.0; m * n];
        problem.jacobian(x, &mut jac);
        let mut gp = vec![0.0; m];
        let mut gm = vec![0.0; m];
        for j in 0..n {
            let h = fd_step(x[j]);
            y[j] = x[j] + h;
            let hp = y[j] - x[j];
            problem.constraints(&y, &mut gp);
            y[j] = x[j] - h;
            let hm = x[j] - y[j];
            problem.constraints(&y, &mut gm);
            y[j] = x[j];
            for k in 0..m {
                let d = (gp[k] - gm[k]) / (hp + hm);
                worst = worst.max(rel(jac[k * n + j], d));
            }
        }
    }
    worst
}
