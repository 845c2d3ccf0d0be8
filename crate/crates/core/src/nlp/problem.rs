/// Smooth inequality-constrained maximization problem.
///
/// Maximize `objective(x)` subject to `g_k(x) <= 0` and `lower <= x <= upper`
/// (bounds may be infinite). Derivatives default to central differences;
/// implementors with analytic derivatives override [`gradient`] and
/// [`jacobian`] and return `true` from [`analytic_derivatives`].
///
/// [`gradient`]: NlpProblem::gradient
/// [`jacobian`]: NlpProblem::jacobian
/// [`analytic_derivatives`]: NlpProblem::analytic_derivatives
pub trait NlpProblem: Sync {
    fn dim(&self) -> usize;
    fn lower(&self) -> &[f64];
    fn upper(&self) -> &[f64];
    fn num_constraints(&self) -> usize;

    fn objective(&self, x: &[f64]) -> f64;

    /// Writes `g_k(x)` for every constraint into `out`.
    fn constraints(&self, x: &[f64], out: &mut [f64]);

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let mut y = x.to_vec();
        for j in 0..x.len() {
            out[j] = central_difference(&mut y, j, fd_step(x[j]), |z| self.objective(z));
        }
    }

    /// Row-major `num_constraints x dim` Jacobian.
    fn jacobian(&self, x: &[f64], out: &mut [f64]) {
        let (n, m) = (self.dim(), self.num_constraints());
        let mut y = x.to_vec();
        let mut plus = vec![0.0; m];
        let mut minus = vec![0.0; m];
        for j in 0..n {
            let h = fd_step(x[j]);
            y[j] = x[j] + h;
            let hp = y[j] - x[j];
            self.constraints(&y, &mut plus);
            y[j] = x[j] - h;
            let hm = x[j] - y[j];
            self.constraints(&y, &mut minus);
            y[j] = x[j];
            for k in 0..m {
                out[k * n + j] = (plus[k] - minus[k]) / (hp + hm);
            }
        }
    }

    fn analytic_derivatives(&self) -> bool {
        false
    }
}

/// Finite-difference step used by the default derivatives and by
/// [`check_gradient`](super::check_gradient).
pub fn fd_step(x: f64) -> f64 {
    1e-6 * x.abs().max(1.0)
}

/// Central difference along coordinate `j`, using the displacements that are
/// actually representable.
pub(crate) fn central_difference(
    y: &mut [f64],
    j: usize,
    h: f64,
    mut f: impl FnMut(&[f64]) -> f64,
) -> f64 {
    let x = y[j];
    y[j] = x + h;
    let hp = y[j] - x;
    let fp = f(y);
    y[j] = x - h;
    let hm = x - y[j];
    let fm = f(y);
    y[j] = x;
    (fp - fm) / (hp + hm)
}

type ScalarFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type VectorFn = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Closure-backed [`NlpProblem`], mostly for tests and the self-test battery.
pub struct FnProblem {
    dim: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    objective: ScalarFn,
    gradient: Option<VectorFn>,
    constraints: Vec<(ScalarFn, Option<VectorFn>)>,
}

impl FnProblem {
    pub fn new(dim: usize, objective: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        assert!(dim >= 1, "problem dimension must be positive");
        Self {
            dim,
            lower: vec![f64::NEG_INFINITY; dim],
            upper: vec![f64::INFINITY; dim],
            objective: Box::new(objective),
            gradient: None,
            constraints: Vec::new(),
        }
    }

    pub fn with_gradient(
        mut self,
        gradient: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.gradient = Some(Box::new(gradient));
        self
    }

    pub fn with_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len(), self.dim);
        assert_eq!(upper.len(), self.dim);
        assert!(lower.iter().zip(&upper).all(|(l, u)| l <= u));
        self.lower = lower;
        self.upper = upper;
        self
    }

    /// Adds `g(x) <= 0` with a finite-difference gradient.
    pub fn constraint(mut self, g: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.constraints.push((Box::new(g), None));
        self
    }

    pub fn constraint_with_gradient(
        mut self,
        g: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        dg: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.constraints.push((Box::new(g), Some(Box::new(dg))));
        self
    }
}

impl NlpProblem for FnProblem {
    fn dim(&self) -> usize {
        self.dim
    }

    fn lower(&self) -> &[f64] {
        &self.lower
    }

    fn upper(&self) -> &[f64] {
        &self.upper
    }

    fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    fn objective(&self, x: &[f64]) -> f64 {
        (self.objective)(x)
    }

    fn constraints(&self, x: &[f64], out: &mut [f64]) {
        for (o, (g, _)) in out.iter_mut().zip(&self.constraints) {
            *o = g(x);
        }
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        match &self.gradient {
            Some(grad) => out.copy_from_slice(&grad(x)),
            None => {
                let mut y = x.to_vec();
                for j in 0..x.len() {
                    out[j] =
                        central_difference(&mut y, j, fd_step(x[j]), |z| (self.objective)(z));
                }
            }
        }
    }

    fn jacobian(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim;
        let mut y = x.to_vec();
        for (k, (g, dg)) in self.constraints.iter().enumerate() {
            let row = &mut out[k * n..(k + 1) * n];
            match dg {
                Some(dg) => row.copy_from_slice(&dg(x)),
                None => {
                    for j in 0..n {
                        row[j] = central_difference(&mut y, j, fd_step(x[j]), |z| g(z));
                    }
                }
            }
        }
    }

    fn analytic_derivatives(&self) -> bool {
        self.gradient.is_some() && self.constraints.iter().all(|(_, dg)| dg.is_some())
    }
}
