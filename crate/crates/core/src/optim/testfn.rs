//! Analytic validation functions with known minima.

/// `sum x_i^2`, minimum 0 at the origin.
pub fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Minimum 0 at `(1, ..., 1)`.
pub fn rosenbrock(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestFunction {
    Sphere,
    Rosenbrock,
}

impl TestFunction {
    pub const ALL: [TestFunction; 2] = [TestFunction::Sphere, TestFunction::Rosenbrock];

    pub fn name(self) -> &'static str {
        match self {
            TestFunction::Sphere => "sphere",
            TestFunction::Rosenbrock => "rosenbrock",
        }
    }

    pub fn eval(self, x: &[f64]) -> f64 {
        match self {
            TestFunction::Sphere => sphere(x),
            TestFunction::Rosenbrock => rosenbrock(x),
        }
    }

    pub fn optimum(self, dim: usize) -> Vec<f64> {
        match self {
            TestFunction::Sphere => vec![0.0; dim],
            TestFunction::Rosenbrock => vec![1.0; dim],
        }
    }

    /// Conventional search box.
    pub fn bounds(self) -> (f64, f64) {
        match self {
            TestFunction::Sphere => (-5.0, 5.0),
            TestFunction::Rosenbrock => (-2.048, 2.048),
        }
    }
}
