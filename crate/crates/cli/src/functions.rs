//! Built-in integrands for the `integrate` subcommand.

/// A test integrand on `[0,1]^d` with its exact integral.
#[derive(Clone, Copy)]
pub struct Integrand {
    pub name: &'static str,
    /// `None` accepts any dimension.
    pub dim: Option<usize>,
    pub default_dim: usize,
    pub f: fn(&[f64]) -> f64,
    pub exact: fn(usize) -> f64,
    /// Hardy-Krause variation, registered for one-dimensional integrands.
    pub variation: Option<f64>,
    pub description: &'static str,
}

const CONST_VALUE: f64 = 0.75;

pub const REGISTRY: &[Integrand] = &[
    Integrand {
        name: "const",
        dim: None,
        default_dim: 1,
        f: |_| CONST_VALUE,
        exact: |_| CONST_VALUE,
        variation: Some(0.0),
        description: "f = 3/4",
    },
    Integrand {
        name: "identity",
        dim: Some(1),
        default_dim: 1,
        f: |x| x[0],
        exact: |_| 0.5,
        variation: Some(1.0),
        description: "f(x) = x",
    },
    Integrand {
        name: "square",
        dim: Some(1),
        default_dim: 1,
        f: |x| x[0] * x[0],
        exact: |_| 1.0 / 3.0,
        variation: Some(1.0),
        description: "f(x) = x^2",
    },
    Integrand {
        name: "cube",
        dim: Some(1),
        default_dim: 1,
        f: |x| x[0] * x[0] * x[0],
        exact: |_| 0.25,
        variation: Some(1.0),
        description: "f(x) = x^3",
    },
    Integrand {
        name: "product2",
        dim: Some(2),
        default_dim: 2,
        f: |x| x[0] * x[1],
        exact: |_| 0.25,
        variation: None,
        description: "f(x, y) = x y",
    },
    Integrand {
        name: "linear3",
        dim: Some(3),
        default_dim: 3,
        f: |x| x[0] + 2.0 * x[1] + 3.0 * x[2],
        exact: |_| 3.0,
        variation: None,
        description: "f(x, y, z) = x + 2y + 3z",
    },
    Integrand {
        name: "cosprod",
        dim: None,
        default_dim: 2,
        f: |x| x.iter().map(|v| v.cos()).product(),
        exact: |d| 1f64.sin().powi(d as i32),
        variation: None,
        description: "f(x) = prod cos(x_j)",
    },
];

pub fn lookup(name: &str) -> Option<&'static Integrand> {
    REGISTRY.iter().find(|f| f.name == name)
}

pub fn names() -> Vec<&'static str> {
    REGISTRY.iter().map(|f| f.name).collect()
}
