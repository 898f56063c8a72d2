use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{ChartedManifold, Coordinate};
use crate::error::{Error, Result};

/// Catalog manifolds with analytic charts, tangents, second derivatives
/// and outward unit normals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Manifold {
    /// `R (cos t, sin t)`.
    Circle { radius: f64 },
    /// Colatitude and longitude chart `(theta, phi)` of the sphere of
    /// radius `radius` in `R^3`.
    Sphere { radius: f64 },
    /// Torus of revolution about the `z` axis, chart `(u, v)` with `u`
    /// around the axis and `v` around the tube.
    Torus { major: f64, minor: f64 },
    /// Segment `[0, length] x {0}` in `R^2`.
    Segment { length: f64 },
}

impl Manifold {
    pub const NAMES: [&'static str; 5] = ["circle", "circleR", "sphere", "torus", "segment"];

    pub fn circle(radius: f64) -> Self {
        Manifold::Circle { radius }
    }

    pub fn sphere() -> Self {
        Manifold::Sphere { radius: 1.0 }
    }

    pub fn torus(major: f64, minor: f64) -> Self {
        Manifold::Torus { major, minor }
    }

    pub fn segment(length: f64) -> Self {
        Manifold::Segment { length }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        Ok(match name {
            "circle" => Self::circle(1.0),
            "circleR" => Self::circle(2.0),
            "sphere" => Self::sphere(),
            "torus" => Self::torus(2.0, 0.5),
            "segment" => Self::segment(1.0),
            other => {
                return Err(Error::UnknownEntry(format!(
                    "manifold `{other}` (known: {})",
                    Self::NAMES.join(", ")
                )))
            }
        })
    }

    pub fn catalog() -> Vec<Self> {
        Self::NAMES.iter().map(|n| Self::by_name(n).unwrap()).collect()
    }

    /// Whether the chart covers a closed manifold (every coordinate
    /// periodic, or the sphere whose colatitude ends at the poles).
    pub fn is_closed(&self) -> bool {
        !matches!(self, Manifold::Segment { .. })
    }

    /// `k`-dimensional volume of the manifold.
    pub fn volume(&self) -> f64 {
        match *self {
            Manifold::Circle { radius } => 2.0 * PI * radius,
            Manifold::Sphere { radius } => 4.0 * PI * radius * radius,
            Manifold::Torus { major, minor } => 4.0 * PI * PI * major * minor,
            Manifold::Segment { length } => length,
        }
    }
}

impl ChartedManifold for Manifold {
    fn name(&self) -> &str {
        match self {
            Manifold::Circle { radius } if *radius == 1.0 => "circle",
            Manifold::Circle { .. } => "circleR",
            Manifold::Sphere { .. } => "sphere",
            Manifold::Torus { .. } => "torus",
            Manifold::Segment { .. } => "segment",
        }
    }

    fn intrinsic_dim(&self) -> usize {
        match self {
            Manifold::Circle { .. } | Manifold::Segment { .. } => 1,
            Manifold::Sphere { .. } | Manifold::Torus { .. } => 2,
        }
    }

    fn ambient_dim(&self) -> usize {
        match self {
            Manifold::Circle { .. } | Manifold::Segment { .. } => 2,
            Manifold::Sphere { .. } | Manifold::Torus { .. } => 3,
        }
    }

    fn domain(&self) -> Vec<Coordinate> {
        match *self {
            Manifold::Circle { .. } => vec![Coordinate::periodic(0.0, 2.0 * PI)],
            Manifold::Sphere { .. } => vec![Coordinate::interval(0.0, PI), Coordinate::periodic(0.0, 2.0 * PI)],
            Manifold::Torus { .. } => vec![Coordinate::periodic(0.0, 2.0 * PI), Coordinate::periodic(0.0, 2.0 * PI)],
            Manifold::Segment { length } => vec![Coordinate::interval(0.0, length)],
        }
    }

    fn embed(&self, u: &[f64]) -> Vec<f64> {
        match *self {
            Manifold::Circle { radius } => vec![radius * u[0].cos(), radius * u[0].sin()],
            Manifold::Sphere { radius } => {
                let (st, ct) = u[0].sin_cos();
                let (sp, cp) = u[1].sin_cos();
                vec![radius * st * cp, radius * st * sp, radius * ct]
            }
            Manifold::Torus { major, minor } => {
                let (su, cu) = u[0].sin_cos();
                let (sv, cv) = u[1].sin_cos();
                let rho = major + minor * cv;
                vec![rho * cu, rho * su, minor * sv]
            }
            Manifold::Segment { .. } => vec![u[0], 0.0],
        }
    }

    fn tangents(&self, u: &[f64]) -> Vec<Vec<f64>> {
        match *self {
            Manifold::Circle { radius } => vec![vec![-radius * u[0].sin(), radius * u[0].cos()]],
            Manifold::Sphere { radius } => {
                let (st, ct) = u[0].sin_cos();
                let (sp, cp) = u[1].sin_cos();
                vec![
                    vec![radius * ct * cp, radius * ct * sp, -radius * st],
                    vec![-radius * st * sp, radius * st * cp, 0.0],
                ]
            }
            Manifold::Torus { major, minor } => {
                let (su, cu) = u[0].sin_cos();
                let (sv, cv) = u[1].sin_cos();
                let rho = major + minor * cv;
                vec![
                    vec![-rho * su, rho * cu, 0.0],
                    vec![-minor * sv * cu, -minor * sv * su, minor * cv],
                ]
            }
            Manifold::Segment { .. } => vec![vec![1.0, 0.0]],
        }
    }

    fn second_derivative(&self, u: &[f64], i: usize, j: usize) -> Vec<f64> {
        match *self {
            Manifold::Circle { radius } => vec![-radius * u[0].cos(), -radius * u[0].sin()],
            Manifold::Sphere { radius } => {
                let (st, ct) = u[0].sin_cos();
                let (sp, cp) = u[1].sin_cos();
                let r = radius;
                match (i, j) {
                    (0, 0) => vec![-r * st * cp, -r * st * sp, -r * ct],
                    (1, 1) => vec![-r * st * cp, -r * st * sp, 0.0],
                    _ => vec![-r * ct * sp, r * ct * cp, 0.0],
                }
            }
            Manifold::Torus { major, minor } => {
                let (su, cu) = u[0].sin_cos();
                let (sv, cv) = u[1].sin_cos();
                let rho = major + minor * cv;
                match (i, j) {
                    (0, 0) => vec![-rho * cu, -rho * su, 0.0],
                    (1, 1) => vec![-minor * cv * cu, -minor * cv * su, -minor * sv],
                    _ => vec![minor * sv * su, -minor * sv * cu, 0.0],
                }
            }
            Manifold::Segment { .. } => vec![0.0, 0.0],
        }
    }

    fn normals(&self, u: &[f64]) -> Vec<Vec<f64>> {
        match *self {
            Manifold::Circle { .. } => vec![vec![u[0].cos(), u[0].sin()]],
            Manifold::Sphere { .. } => {
                let (st, ct) = u[0].sin_cos();
                let (sp, cp) = u[1].sin_cos();
                vec![vec![st * cp, st * sp, ct]]
            }
            Manifold::Torus { .. } => {
                let (su, cu) = u[0].sin_cos();
                let (sv, cv) = u[1].sin_cos();
                vec![vec![cv * cu, cv * su, sv]]
            }
            Manifold::Segment { .. } => vec![vec![0.0, 1.0]],
        }
    }

    fn distance(&self, y: &[f64]) -> Option<f64> {
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        Some(match *self {
            Manifold::Circle { radius } | Manifold::Sphere { radius } => (norm(y) - radius).abs(),
            Manifold::Torus { major, minor } => {
                let rho = y[0].hypot(y[1]);
                ((rho - major).hypot(y[2]) - minor).abs()
            }
            Manifold::Segment { length } => (y[0] - y[0].clamp(0.0, length)).hypot(y[1]),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{fd_tangents, frame_residuals, second_fundamental_at};
    use rand::{Rng, SeedableRng};

    #[test]
    fn distance_matches_normal_offsets() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for m in [Manifold::circle(2.0), Manifold::sphere(), Manifold::torus(2.0, 0.5)] {
            for _ in 0..200 {
                let u = random_point(&m, &mut rng);
                let r = rng.random_range(-0.3..0.3);
                let y: Vec<f64> = m.embed(&u).iter().zip(&m.normals(&u)[0]).map(|(p, n)| p + r * n).collect();
                assert!((m.distance(&y).unwrap() - r.abs()).abs() < 1e-12, "{}", m.name());
            }
        }
        assert_eq!(Manifold::segment(1.0).distance(&[2.0, 0.0]), Some(1.0));
    }

    fn random_point(m: &Manifold, rng: &mut impl Rng) -> Vec<f64> {
        m.domain()
            .iter()
            .map(|c| {
                // keep clear of the sphere's poles
                let pad = if c.periodic { 0.0 } else { 1e-3 * c.length() };
                rng.random_range(c.lo + pad..c.hi - pad)
            })
            .collect()
    }

    #[test]
    fn frames_are_orthonormal_at_random_points() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for m in Manifold::catalog() {
            for _ in 0..1000 {
                let u = random_point(&m, &mut rng);
                let (t, o) = frame_residuals(&m, &u);
                assert!(t <= 1e-10 && o <= 1e-10, "{}: {t} {o}", m.name());
            }
        }
    }

    #[test]
    fn analytic_derivatives_match_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for m in Manifold::catalog() {
            for _ in 0..50 {
                let u = random_point(&m, &mut rng);
                let fd = fd_tangents(&m, &u, 1e-5);
                for (a, b) in m.tangents(&u).iter().zip(&fd) {
                    for (x, y) in a.iter().zip(b) {
                        assert!((x - y).abs() < 1e-8);
                    }
                }
                let k = m.intrinsic_dim();
                for i in 0..k {
                    for j in 0..k {
                        let mut up = u.clone();
                        let mut dn = u.clone();
                        up[j] += 1e-5;
                        dn[j] -= 1e-5;
                        let fd: Vec<f64> = m.tangents(&up)[i]
                            .iter()
                            .zip(&m.tangents(&dn)[i])
                            .map(|(p, q)| (p - q) / 2e-5)
                            .collect();
                        for (x, y) in m.second_derivative(&u, i, j).iter().zip(&fd) {
                            assert!((x - y).abs() < 1e-8, "{} ({i},{j})", m.name());
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn second_fundamental_forms_are_symmetric() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for m in Manifold::catalog() {
            for _ in 0..100 {
                let u = random_point(&m, &mut rng);
                let s = second_fundamental_at(&m, &u).unwrap();
                let k = m.intrinsic_dim();
                for f in &s.forms {
                    for i in 0..k {
                        for j in 0..k {
                            assert!((f[i * k + j] - f[j * k + i]).abs() <= 1e-10);
                        }
                    }
                }
                assert!(s.sup_norm.is_finite());
            }
        }
    }

    #[test]
    fn names_round_trip() {
        for name in Manifold::NAMES {
            assert_eq!(Manifold::by_name(name).unwrap().name(), name);
        }
        assert!(Manifold::by_name("klein").is_err());
    }
}
