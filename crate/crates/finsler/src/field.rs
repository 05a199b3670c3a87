//! Scalar, vector, and matrix fields over chart coordinates.
//!
//! Fields are closures plus optional analytic derivatives; when a
//! derivative callback is absent it falls back to central finite
//! differences with steps balanced for first (`~eps^(1/3)`) and second
//! (`~eps^(1/4)`) differences.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

/// Default relative step for first differences of field values.
pub const FD_GRADIENT_STEP: f64 = 5.0e-6;
/// Default relative step for second differences of field values.
pub const FD_HESSIAN_STEP: f64 = 1.2e-4;

type ScalarFn = dyn Fn(&DVector<f64>) -> f64 + Send + Sync;
type VectorFn = dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync;
type MatrixFn = dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync;
type MatrixPartialsFn = dyn Fn(&DVector<f64>) -> Vec<DMatrix<f64>> + Send + Sync;

fn step(base: f64, x: f64) -> f64 {
    base * x.abs().max(1.0)
}

/// Real-valued field with optional analytic gradient and Hessian.
#[derive(Clone)]
pub struct ScalarField {
    value: Arc<ScalarFn>,
    gradient: Option<Arc<VectorFn>>,
    hessian: Option<Arc<MatrixFn>>,
}

impl ScalarField {
    pub fn from_fn(f: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static) -> Self {
        ScalarField {
            value: Arc::new(f),
            gradient: None,
            hessian: None,
        }
    }

    pub fn constant(c: f64) -> Self {
        ScalarField::from_fn(move |_| c)
            .with_gradient_fn(move |x| DVector::zeros(x.len()))
            .with_hessian_fn(move |x| DMatrix::zeros(x.len(), x.len()))
    }

    pub fn with_gradient_fn(
        mut self,
        g: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        self.gradient = Some(Arc::new(g));
        self
    }

    pub fn with_hessian_fn(
        mut self,
        h: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.hessian = Some(Arc::new(h));
        self
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        if let Some(g) = &self.gradient {
            return g(x);
        }
        let n = x.len();
        let mut out = DVector::zeros(n);
        let mut xp = x.clone();
        for i in 0..n {
            let h = step(FD_GRADIENT_STEP, x[i]);
            xp[i] = x[i] + h;
            let fp = (self.value)(&xp);
            xp[i] = x[i] - h;
            let fm = (self.value)(&xp);
            xp[i] = x[i];
            out[i] = (fp - fm) / (2.0 * h);
        }
        out
    }

    pub fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        if let Some(h) = &self.hessian {
            return h(x);
        }
        let n = x.len();
        let f0 = (self.value)(x);
        let mut out = DMatrix::zeros(n, n);
        let mut xp = x.clone();
        for i in 0..n {
            let hi = step(FD_HESSIAN_STEP, x[i]);
            xp[i] = x[i] + hi;
            let fp = (self.value)(&xp);
            xp[i] = x[i] - hi;
            let fm = (self.value)(&xp);
            xp[i] = x[i];
            out[(i, i)] = (fp - 2.0 * f0 + fm) / (hi * hi);
            for j in (i + 1)..n {
                let hj = step(FD_HESSIAN_STEP, x[j]);
                let mut eval = |si: f64, sj: f64| {
                    xp[i] = x[i] + si * hi;
                    xp[j] = x[j] + sj * hj;
                    let v = (self.value)(&xp);
                    xp[i] = x[i];
                    xp[j] = x[j];
                    v
                };
                let mixed = (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0))
                    / (4.0 * hi * hj);
                out[(i, j)] = mixed;
                out[(j, i)] = mixed;
            }
        }
        out
    }
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarField")
            .field("analytic_gradient", &self.gradient.is_some())
            .field("analytic_hessian", &self.hessian.is_some())
            .finish()
    }
}

/// Vector-valued field (covector data for Randers metrics).
#[derive(Clone)]
pub struct VectorField {
    value: Arc<VectorFn>,
}

impl VectorField {
    pub fn from_fn(f: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static) -> Self {
        VectorField { value: Arc::new(f) }
    }

    pub fn constant(v: DVector<f64>) -> Self {
        VectorField::from_fn(move |_| v.clone())
    }

    pub fn value(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.value)(x)
    }
}

impl std::fmt::Debug for VectorField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("VectorField")
    }
}

/// Symmetric-matrix-valued field with optional analytic coordinate
/// partials `d a / d x_k`.
#[derive(Clone)]
pub struct MatrixField {
    value: Arc<MatrixFn>,
    partials: Option<Arc<MatrixPartialsFn>>,
}

impl MatrixField {
    pub fn from_fn(f: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        MatrixField {
            value: Arc::new(f),
            partials: None,
        }
    }

    pub fn constant(m: DMatrix<f64>) -> Self {
        let dim = m.nrows();
        MatrixField::from_fn(move |_| m.clone())
            .with_partials_fn(move |_| vec![DMatrix::zeros(dim, dim); dim])
    }

    pub fn identity(dim: usize) -> Self {
        MatrixField::constant(DMatrix::identity(dim, dim))
    }

    pub fn with_partials_fn(
        mut self,
        p: impl Fn(&DVector<f64>) -> Vec<DMatrix<f64>> + Send + Sync + 'static,
    ) -> Self {
        self.partials = Some(Arc::new(p));
        self
    }

    pub fn has_analytic_partials(&self) -> bool {
        self.partials.is_some()
    }

    pub fn value(&self, x: &DVector<f64>) -> DMatrix<f64> {
        (self.value)(x)
    }

    /// All coordinate partials at `x`, entry-wise central differences when
    /// no analytic callback is present.
    pub fn partials(&self, x: &DVector<f64>) -> Vec<DMatrix<f64>> {
        if let Some(p) = &self.partials {
            return p(x);
        }
        let n = x.len();
        let mut xp = x.clone();
        (0..n)
            .map(|k| {
                let h = step(FD_GRADIENT_STEP, x[k]);
                xp[k] = x[k] + h;
                let ap = (self.value)(&xp);
                xp[k] = x[k] - h;
                let am = (self.value)(&xp);
                xp[k] = x[k];
                (ap - am) / (2.0 * h)
            })
            .collect()
    }
}

impl std::fmt::Debug for MatrixField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MatrixField")
            .field("analytic_partials", &self.partials.is_some())
            .finish()
    }
}
