//! Explicit schemes for the semilinear problem U̇ = A(t/ε)U + g(U) whose
//! accuracy is uniform in ε: the oscillatory linear part is integrated
//! exactly through the closed-form algebra, the smooth nonlinearity enters
//! through values and first derivatives frozen at the step start.

use nalgebra::{DMatrix, DVector};

use crate::error::OscError;
use crate::linear::{hk_matrices, nl2_matrices, LinearOscSystem, StepContext};

/// The smooth forcing g together with an optional analytic Jacobian.
/// Without one, the Jacobian falls back to central finite differences.
pub struct NonlinearTerm {
    g: Box<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>,
    jacobian: Option<Box<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>>,
}

impl NonlinearTerm {
    pub fn new(g: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static) -> Self {
        NonlinearTerm {
            g: Box::new(g),
            jacobian: None,
        }
    }

    /// Attach an analytic Jacobian ∇g.
    pub fn with_jacobian(
        mut self,
        jacobian: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.jacobian = Some(Box::new(jacobian));
        self
    }

    /// g ≡ 0 (reduces every scheme to its linear counterpart).
    pub fn zero() -> Self {
        NonlinearTerm::new(|u| DVector::zeros(u.len()))
    }

    pub fn eval(&self, u: &DVector<f64>) -> DVector<f64> {
        (self.g)(u)
    }

    /// Analytic Jacobian when provided, otherwise central differences with
    /// step 10⁻⁶·(1 + ‖u‖) per coordinate.
    pub fn jacobian(&self, u: &DVector<f64>) -> DMatrix<f64> {
        if let Some(jac) = &self.jacobian {
            return jac(u);
        }
        let n = u.len();
        let h = 1e-6 * (1.0 + u.norm());
        let mut out = DMatrix::zeros((self.g)(u).len(), n);
        for j in 0..n {
            let mut up = u.clone();
            let mut dn = u.clone();
            up[j] += h;
            dn[j] -= h;
            let col = ((self.g)(&up) - (self.g)(&dn)) / (2.0 * h);
            out.set_column(j, &col);
        }
        out
    }
}

fn check_dims(sys: &LinearOscSystem, u: &DVector<f64>) -> Result<(), OscError> {
    if u.len() != sys.dim() {
        return Err(OscError::DimensionMismatch(format!(
            "state has length {}, system dimension is {}",
            u.len(),
            sys.dim()
        )));
    }
    Ok(())
}

fn check_g(sys: &LinearOscSystem, g_n: &DVector<f64>) -> Result<(), OscError> {
    if g_n.len() != sys.dim() {
        return Err(OscError::DimensionMismatch(format!(
            "forcing returned length {}, system dimension is {}",
            g_n.len(),
            sys.dim()
        )));
    }
    Ok(())
}

/// First-order scheme, uniformly accurate in ε:
/// U_{n+1} = U_n + (∫A)·U_n + Δt·g(U_n).
pub fn step_nl_order1(
    sys: &LinearOscSystem,
    ctx: &StepContext,
    term: &NonlinearTerm,
    u: &DVector<f64>,
) -> Result<DVector<f64>, OscError> {
    check_dims(sys, u)?;
    let hs = hk_matrices(sys, &ctx.with_order(1))?;
    let g_n = term.eval(u);
    check_g(sys, &g_n)?;
    let mut acc = u.clone();
    acc += &hs[0] * u;
    acc += g_n * ctx.dt();
    Ok(acc)
}

/// The first-order interior increment h̃(τ) = F(τ)·U_n + τ·g(U_n), with
/// F(τ) = ∫₀^τ A in local time — the approximation of U(t_n+τ) − U_n the
/// second-order scheme linearizes g around.
pub fn htilde(
    sys: &LinearOscSystem,
    ctx: &StepContext,
    u: &DVector<f64>,
    g_n: &DVector<f64>,
    tau: f64,
) -> Result<DVector<f64>, OscError> {
    check_dims(sys, u)?;
    check_g(sys, g_n)?;
    let f = sys.local_polys(ctx.t_n())?.integral_from_zero();
    Ok(f.eval_real(tau) * u + g_n * tau)
}

/// Second-order scheme, uniformly accurate in ε:
///
/// U_{n+1} = U_n + H₁U_n + (∫A∫A)U_n + (∫τ·A)g_n + Δt·g_n
///           + ∇g(U_n)·∫₀^Δt h̃(τ) dτ,
///
/// where the last integral is K·U_n + (Δt²/2)·g_n with K = ∫∫A.
pub fn step_nl_order2(
    sys: &LinearOscSystem,
    ctx: &StepContext,
    term: &NonlinearTerm,
    u: &DVector<f64>,
) -> Result<DVector<f64>, OscError> {
    check_dims(sys, u)?;
    let ms = nl2_matrices(sys, ctx)?;
    let (h1, w, s, k) = (&ms[0], &ms[1], &ms[2], &ms[3]);
    let g_n = term.eval(u);
    check_g(sys, &g_n)?;
    let jac = term.jacobian(u);
    if jac.nrows() != sys.dim() || jac.ncols() != sys.dim() {
        return Err(OscError::DimensionMismatch(format!(
            "Jacobian is {}x{}, system dimension is {}",
            jac.nrows(),
            jac.ncols(),
            sys.dim()
        )));
    }
    let dt = ctx.dt();
    let mut acc = u.clone();
    acc += h1 * u;
    acc += w * u;
    acc += s * &g_n;
    acc += &g_n * dt;
    acc += jac * (k * u + &g_n * (dt * dt / 2.0));
    Ok(acc)
}
