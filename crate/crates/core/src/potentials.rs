//! Built-in vector potentials `A` and scalar potentials `V`.
//!
//! The named fields cover the standard test cases: a polynomial field with
//! large non-gauge content (`ex1`), two highly oscillatory unit-modulus
//! fields (`ex2`, `ex3`), a rotational field for the L-shaped Neumann
//! problem (`ex4`), and three classical gauges of the uniform magnetic
//! field `B = 1` (`a1`, `a2`, `a3`) which are pairwise equivalent and so
//! must produce identical spectra.
//!
//! Scalar potentials are either zero or a piecewise-constant random grid
//! whose values are `scale · u` with `u` uniform in `[0,1)` from a counter
//! based SplitMix64 stream: the unit grid depends only on the seed, so
//! rescaling changes the strength of the potential without moving its
//! features.

use std::f64::consts::PI;

/// A vector potential `A : Ω → R²`.
pub trait VectorPotential: Send + Sync {
    fn eval(&self, x: f64, y: f64) -> [f64; 2];

    /// Evaluate at a point known to lie in mesh cell `cell`. Assembly and
    /// quadrature loops call this form; piecewise-defined fields (such as
    /// gauge-transformed ones) override it, analytic fields ignore the
    /// cell.
    fn eval_on_cell(&self, _cell: usize, x: f64, y: f64) -> [f64; 2] {
        self.eval(x, y)
    }

    /// Scalar curl `∂ₓA_y − ∂ᵧA_x`. The default is a central difference
    /// with step 1e-6; implementors with analytic curls override it.
    fn curl(&self, x: f64, y: f64) -> f64 {
        let h = 1e-6;
        let dy = (self.eval(x + h, y)[1] - self.eval(x - h, y)[1]) / (2.0 * h);
        let dx = (self.eval(x, y + h)[0] - self.eval(x, y - h)[0]) / (2.0 * h);
        dy - dx
    }

    /// Total polynomial degree of the components, when polynomial. Drives
    /// the quadrature exactness used during assembly.
    fn polynomial_degree(&self) -> Option<usize> {
        None
    }
}

/// A scalar potential `V : Ω → R`.
pub trait ScalarPotential: Send + Sync {
    fn eval(&self, x: f64, y: f64) -> f64;

    fn polynomial_degree(&self) -> Option<usize> {
        None
    }
}

/// The catalog of named vector potentials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldKind {
    /// `−100(x² + y², x² − y²)`: polynomial, strong gauge content.
    Ex1,
    /// `−100(cos f₁ sin f₂, sin f₁ cos f₂)` with `f₁ = 5π sin(x² + y²)`,
    /// `f₂ = 5π cos(x² + y²)`: radially oscillatory.
    Ex2,
    /// `−100(cos f, sin f)` with `f = π sin(πx) cos(πy)`: oscillatory with
    /// pointwise modulus exactly 100.
    Ex3,
    /// `25(−y, x)`: uniform magnetic field of strength 50.
    Ex4,
    /// Symmetric gauge `(−y/2, x/2)` of the unit magnetic field.
    A1,
    /// Landau gauge `(−y, 0)` of the unit magnetic field.
    A2,
    /// Landau gauge `(0, x)` of the unit magnetic field.
    A3,
    /// A constant (curl-free) field.
    Constant(f64, f64),
    Zero,
}

impl VectorPotential for FieldKind {
    fn eval(&self, x: f64, y: f64) -> [f64; 2] {
        match *self {
            FieldKind::Ex1 => [-100.0 * (x * x + y * y), -100.0 * (x * x - y * y)],
            FieldKind::Ex2 => {
                let r2 = x * x + y * y;
                let f1 = 5.0 * PI * r2.sin();
                let f2 = 5.0 * PI * r2.cos();
                [-100.0 * f1.cos() * f2.sin(), -100.0 * f1.sin() * f2.cos()]
            }
            FieldKind::Ex3 => {
                let f = PI * (PI * x).sin() * (PI * y).cos();
                [-100.0 * f.cos(), -100.0 * f.sin()]
            }
            FieldKind::Ex4 => [-25.0 * y, 25.0 * x],
            FieldKind::A1 => [-y / 2.0, x / 2.0],
            FieldKind::A2 => [-y, 0.0],
            FieldKind::A3 => [0.0, x],
            FieldKind::Constant(ax, ay) => [ax, ay],
            FieldKind::Zero => [0.0, 0.0],
        }
    }

    fn curl(&self, x: f64, y: f64) -> f64 {
        match *self {
            FieldKind::Ex1 => -200.0 * x + 200.0 * y,
            FieldKind::Ex2 => {
                let r2 = x * x + y * y;
                let f1 = 5.0 * PI * r2.sin();
                let f2 = 5.0 * PI * r2.cos();
                let cc = f1.cos() * f2.cos();
                let ss = f1.sin() * f2.sin();
                -1000.0
                    * PI
                    * (x * (cc * r2.cos() + ss * r2.sin())
                        + y * (ss * r2.cos() + cc * r2.sin()))
            }
            FieldKind::Ex3 => {
                let f = PI * (PI * x).sin() * (PI * y).cos();
                let fx = PI * PI * (PI * x).cos() * (PI * y).cos();
                let fy = -PI * PI * (PI * x).sin() * (PI * y).sin();
                -100.0 * (f.cos() * fx + f.sin() * fy)
            }
            FieldKind::Ex4 => 50.0,
            FieldKind::A1 | FieldKind::A2 | FieldKind::A3 => 1.0,
            FieldKind::Constant(..) | FieldKind::Zero => 0.0,
        }
    }

    fn polynomial_degree(&self) -> Option<usize> {
        match *self {
            FieldKind::Ex1 => Some(2),
            FieldKind::Ex4 | FieldKind::A1 | FieldKind::A2 | FieldKind::A3 => Some(1),
            FieldKind::Constant(..) | FieldKind::Zero => Some(0),
            FieldKind::Ex2 | FieldKind::Ex3 => None,
        }
    }
}

/// Parse a catalog field name: `ex1`–`ex4`, `a1`–`a3`, `zero`, or
/// `constant:<ax>,<ay>`.
pub fn vector_by_name(name: &str) -> Option<FieldKind> {
    match name {
        "ex1" => Some(FieldKind::Ex1),
        "ex2" => Some(FieldKind::Ex2),
        "ex3" => Some(FieldKind::Ex3),
        "ex4" => Some(FieldKind::Ex4),
        "a1" => Some(FieldKind::A1),
        "a2" => Some(FieldKind::A2),
        "a3" => Some(FieldKind::A3),
        "zero" => Some(FieldKind::Zero),
        _ => {
            let rest = name.strip_prefix("constant:")?;
            let (ax, ay) = rest.split_once(',')?;
            Some(FieldKind::Constant(
                ax.trim().parse().ok()?,
                ay.trim().parse().ok()?,
            ))
        }
    }
}

/// Names and one-line descriptions of the built-in vector potentials.
pub fn vector_catalog() -> Vec<(&'static str, &'static str)> {
    vec![
        ("ex1", "-100(x^2+y^2, x^2-y^2); polynomial, strong gauge content"),
        ("ex2", "-100(cos f1 sin f2, sin f1 cos f2), f_i = 5*pi*{sin,cos}(x^2+y^2)"),
        ("ex3", "-100(cos f, sin f), f = pi sin(pi x) cos(pi y); |A| = 100"),
        ("ex4", "25(-y, x); uniform magnetic field 50"),
        ("a1", "(-y/2, x/2); symmetric gauge of B = 1"),
        ("a2", "(-y, 0); Landau gauge of B = 1"),
        ("a3", "(0, x); Landau gauge of B = 1"),
        ("zero", "A = 0 (plain Laplacian plus V)"),
        ("constant:<ax>,<ay>", "constant curl-free field"),
    ]
}

/// The zero scalar potential.
#[derive(Debug, Clone, Copy)]
pub struct ZeroScalar;

impl ScalarPotential for ZeroScalar {
    fn eval(&self, _x: f64, _y: f64) -> f64 {
        0.0
    }

    fn polynomial_degree(&self) -> Option<usize> {
        Some(0)
    }
}

const SPLITMIX_GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// The k-th output of a SplitMix64 stream started at `seed`, as a closed
/// form (the stream state after k + 1 increments).
pub(crate) fn splitmix64_at(seed: u64, k: u64) -> u64 {
    let mut z = seed.wrapping_add(SPLITMIX_GOLDEN.wrapping_mul(k.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform value in `[0, 1)` with 53 random bits.
pub(crate) fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// A piecewise-constant random potential on an `n × n` grid over a
/// bounding box. Values are `scale · u(seed, row·n + col)` with `u`
/// uniform in `[0,1)`; the unit grid is stored separately from the scale,
/// so two potentials with the same seed differ only by an exact factor.
#[derive(Debug, Clone)]
pub struct GridScalarPotential {
    n: usize,
    scale: f64,
    unit: Vec<f64>,
    bbox: [f64; 4],
}

impl GridScalarPotential {
    /// `bbox = [x_min, y_min, x_max, y_max]`; points outside clamp to the
    /// nearest cell.
    pub fn new(seed: u64, scale: f64, n: usize, bbox: [f64; 4]) -> Self {
        assert!(n >= 1 && bbox[2] > bbox[0] && bbox[3] > bbox[1]);
        let unit = (0..n * n)
            .map(|k| unit_f64(splitmix64_at(seed, k as u64)))
            .collect();
        GridScalarPotential { n, scale, unit, bbox }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// The unit grid in row-major order (row = y index).
    pub fn unit_values(&self) -> &[f64] {
        &self.unit
    }

    fn cell_index(&self, x: f64, y: f64) -> usize {
        let nx = self.n as f64;
        let fx = (x - self.bbox[0]) / (self.bbox[2] - self.bbox[0]) * nx;
        let fy = (y - self.bbox[1]) / (self.bbox[3] - self.bbox[1]) * nx;
        let i = (fx.floor() as i64).clamp(0, self.n as i64 - 1) as usize;
        let j = (fy.floor() as i64).clamp(0, self.n as i64 - 1) as usize;
        j * self.n + i
    }
}

impl ScalarPotential for GridScalarPotential {
    fn eval(&self, x: f64, y: f64) -> f64 {
        self.scale * self.unit[self.cell_index(x, y)]
    }
}
