//! Named test potentials. Every entry is shifted so that `V* = 0`.

use serde::{Deserialize, Serialize};

use super::{RegionSpec, ScalarField};
use crate::error::{Error, Result};

/// Radial profiles `V(x) = f(|x|)`.
///
/// Each profile is stored through `g(r) = f'(r)/r` and `f''(r)`, both smooth
/// at the origin, so that `grad V = g(r) x` and
/// `Hess V = g I + (f'' - g) x x^T / r^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadialProfile {
    /// `r^3/3 - r^2/2 + 1/6`: minimum on the unit sphere, maximum at 0.
    Ring,
    /// `(r^2 - 1)^2 / 8`: unit-sphere minimum with a flatter core.
    SoftRing,
    /// `r^2 / 2`.
    Quadratic,
    /// `r^4 / 4`.
    Quartic,
    /// `(r^2 - 1)^2 / 4`; in one dimension this is the double well.
    Well,
}

impl RadialProfile {
    fn f(self, r: f64) -> f64 {
        match self {
            RadialProfile::Ring => r * r * r / 3.0 - r * r / 2.0 + 1.0 / 6.0,
            RadialProfile::SoftRing => (r * r - 1.0).powi(2) / 8.0,
            RadialProfile::Quadratic => r * r / 2.0,
            RadialProfile::Quartic => r.powi(4) / 4.0,
            RadialProfile::Well => (r * r - 1.0).powi(2) / 4.0,
        }
    }

    /// `f'(r) / r`.
    fn g(self, r: f64) -> f64 {
        match self {
            RadialProfile::Ring => r - 1.0,
            RadialProfile::SoftRing => (r * r - 1.0) / 2.0,
            RadialProfile::Quadratic => 1.0,
            RadialProfile::Quartic => r * r,
            RadialProfile::Well => r * r - 1.0,
        }
    }

    fn f2(self, r: f64) -> f64 {
        match self {
            RadialProfile::Ring => 2.0 * r - 1.0,
            RadialProfile::SoftRing => (3.0 * r * r - 1.0) / 2.0,
            RadialProfile::Quadratic => 1.0,
            RadialProfile::Quartic => 3.0 * r * r,
            RadialProfile::Well => 3.0 * r * r - 1.0,
        }
    }

    /// Radius of the minimizing sphere (0 for a point minimum).
    pub fn optimal_radius(self) -> f64 {
        match self {
            RadialProfile::Ring | RadialProfile::SoftRing | RadialProfile::Well => 1.0,
            RadialProfile::Quadratic | RadialProfile::Quartic => 0.0,
        }
    }

    /// Profile value `f(r)`.
    pub fn value(self, r: f64) -> f64 {
        self.f(r)
    }

    /// Profile slope `f'(r)`.
    pub fn slope(self, r: f64) -> f64 {
        self.g(r) * r
    }
}

/// Catalog potentials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Potential {
    Radial {
        name: String,
        profile: RadialProfile,
        dim: usize,
    },
    /// `V = F^2 / (128 a^2 R^4)` with the quartic torus polynomial
    /// `F = (|x|^2 + R^2 - a^2)^2 - 4 R^2 (x^2 + y^2)`.
    Torus { name: String, major: f64, minor: f64 },
}

/// Names accepted by [`Potential::by_name`].
pub const CATALOG: &[&str] = &[
    "circle2d",
    "sphere3d",
    "softring2d",
    "quadratic",
    "quadratic1d",
    "quartic",
    "doublewell1d",
    "torus3d",
];

impl Potential {
    pub fn radial(name: &str, profile: RadialProfile, dim: usize) -> Self {
        Potential::Radial {
            name: name.to_string(),
            profile,
            dim,
        }
    }

    /// `|x|^3/3 - |x|^2/2 + 1/6` in the plane.
    pub fn circle2d() -> Self {
        Self::radial("circle2d", RadialProfile::Ring, 2)
    }

    pub fn quadratic(dim: usize) -> Self {
        Self::radial(
            if dim == 1 { "quadratic1d" } else { "quadratic" },
            RadialProfile::Quadratic,
            dim,
        )
    }

    pub fn quartic(dim: usize) -> Self {
        Self::radial("quartic", RadialProfile::Quartic, dim)
    }

    pub fn double_well() -> Self {
        Self::radial("doublewell1d", RadialProfile::Well, 1)
    }

    pub fn by_name(name: &str) -> Result<Self> {
        Ok(match name {
            "circle2d" => Self::circle2d(),
            "sphere3d" => Self::radial("sphere3d", RadialProfile::Ring, 3),
            "softring2d" => Self::radial("softring2d", RadialProfile::SoftRing, 2),
            "quadratic" => Self::quadratic(2),
            "quadratic1d" | "ou1d" => Self::quadratic(1),
            "quartic" => Self::quartic(2),
            "doublewell1d" => Self::double_well(),
            "torus3d" => Potential::Torus {
                name: "torus3d".into(),
                major: 2.0,
                minor: 0.5,
            },
            other => return Err(Error::UnknownEntry(other.to_string())),
        })
    }

    pub fn profile(&self) -> Option<RadialProfile> {
        match self {
            Potential::Radial { profile, .. } => Some(*profile),
            Potential::Torus { .. } => None,
        }
    }

    /// Neighbourhoods and radii used when certifying this entry.
    pub fn declared(&self) -> Declared {
        let d = self.dim();
        let origin = vec![0.0; d];
        let cube = |half: f64| RegionSpec::Box {
            lo: vec![-half; d],
            hi: vec![half; d],
        };
        match self {
            Potential::Radial { profile, .. } => match profile {
                RadialProfile::Ring | RadialProfile::Well => Declared {
                    n_s: Some(RegionSpec::annulus(&origin, 0.5, 1.5)),
                    n_x: Some(RegionSpec::ball(&origin, 0.25)),
                    r0: 2.0,
                    outer_radius: 10.0,
                    search_box: if d == 1 { cube(2.0) } else { cube(3.0) },
                    manifold: match d {
                        2 => Some("circle"),
                        3 => Some("sphere"),
                        _ => None,
                    },
                },
                RadialProfile::SoftRing => Declared {
                    n_s: Some(RegionSpec::annulus(&origin, 0.98, 1.02)),
                    n_x: Some(RegionSpec::ball(&origin, 0.25)),
                    r0: 1.0,
                    outer_radius: 10.0,
                    search_box: cube(3.0),
                    manifold: match d {
                        2 => Some("circle"),
                        3 => Some("sphere"),
                        _ => None,
                    },
                },
                RadialProfile::Quadratic | RadialProfile::Quartic => Declared {
                    n_s: Some(RegionSpec::ball(&origin, 0.2)),
                    n_x: None,
                    r0: 1.0,
                    outer_radius: 10.0,
                    search_box: cube(3.0),
                    manifold: None,
                },
            },
            Potential::Torus { major, minor, .. } => Declared {
                n_s: None,
                n_x: None,
                r0: major + minor,
                outer_radius: 4.0 * (major + minor),
                search_box: cube(major + 2.0 * minor),
                manifold: Some("torus"),
            },
        }
    }
}

/// Explicit neighbourhood choices for one potential: `N(S)`, `N(X)`, `R0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Declared {
    pub n_s: Option<RegionSpec>,
    pub n_x: Option<RegionSpec>,
    pub r0: f64,
    /// Outer radius of the shell `R0 <= |x| <= outer_radius` probed for the
    /// error bound.
    pub outer_radius: f64,
    pub search_box: RegionSpec,
    /// Name of the optimal set in the manifold catalog.
    pub manifold: Option<&'static str>,
}

impl ScalarField for Potential {
    fn name(&self) -> &str {
        match self {
            Potential::Radial { name, .. } | Potential::Torus { name, .. } => name,
        }
    }

    fn dim(&self) -> usize {
        match self {
            Potential::Radial { dim, .. } => *dim,
            Potential::Torus { .. } => 3,
        }
    }

    fn value(&self, x: &[f64]) -> f64 {
        match self {
            Potential::Radial { profile, .. } => profile.f(norm(x)),
            Potential::Torus { major, minor, .. } => {
                let t = TorusPoly::new(*major, *minor, x);
                t.f * t.f / t.scale
            }
        }
    }

    fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Potential::Radial { profile, .. } => {
                let g = profile.g(norm(x));
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = g * xi;
                }
            }
            Potential::Torus { major, minor, .. } => {
                let t = TorusPoly::new(*major, *minor, x);
                let gf = t.grad(x);
                for i in 0..3 {
                    out[i] = 2.0 * t.f * gf[i] / t.scale;
                }
            }
        }
    }

    fn hessian_apply(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        match self {
            Potential::Radial { profile, .. } => {
                let r = norm(x);
                let g = profile.g(r);
                let mut out: Vec<f64> = v.iter().map(|vi| g * vi).collect();
                if r > 0.0 {
                    let c = (profile.f2(r) - g) * dot(x, v) / (r * r);
                    for (o, xi) in out.iter_mut().zip(x) {
                        *o += c * xi;
                    }
                }
                out
            }
            Potential::Torus { major, minor, .. } => {
                let t = TorusPoly::new(*major, *minor, x);
                let gf = t.grad(x);
                let hf = t.hess(x);
                let gv = dot(&gf, v);
                (0..3)
                    .map(|i| {
                        let hv: f64 = (0..3).map(|j| hf[i][j] * v[j]).sum();
                        2.0 * (gf[i] * gv + t.f * hv) / t.scale
                    })
                    .collect()
            }
        }
    }

    fn laplacian(&self, x: &[f64]) -> f64 {
        match self {
            Potential::Radial { profile, dim, .. } => {
                let r = norm(x);
                profile.f2(r) + (*dim as f64 - 1.0) * profile.g(r)
            }
            Potential::Torus { major, minor, .. } => {
                let t = TorusPoly::new(*major, *minor, x);
                let gf = t.grad(x);
                let hf = t.hess(x);
                let tr = hf[0][0] + hf[1][1] + hf[2][2];
                2.0 * (dot(&gf, &gf) + t.f * tr) / t.scale
            }
        }
    }

    fn global_min(&self) -> f64 {
        0.0
    }

    fn distance_to_optimal_set(&self, x: &[f64]) -> Option<f64> {
        Some(match self {
            Potential::Radial { profile, .. } => (norm(x) - profile.optimal_radius()).abs(),
            Potential::Torus { major, minor, .. } => {
                let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
                ((rho - major).hypot(x[2]) - minor).abs()
            }
        })
    }

    fn optimal_set_dim(&self) -> Option<usize> {
        Some(match self {
            Potential::Radial { profile, dim, .. } => {
                if profile.optimal_radius() > 0.0 && *dim > 1 {
                    dim - 1
                } else {
                    0
                }
            }
            Potential::Torus { .. } => 2,
        })
    }
}

struct TorusPoly {
    big: f64,
    q: f64,
    f: f64,
    scale: f64,
}

impl TorusPoly {
    fn new(major: f64, minor: f64, x: &[f64]) -> Self {
        let s = dot(x, x);
        let q = s + major * major - minor * minor;
        let f = q * q - 4.0 * major * major * (x[0] * x[0] + x[1] * x[1]);
        TorusPoly {
            big: major,
            q,
            f,
            scale: 128.0 * minor * minor * major.powi(4),
        }
    }

    fn grad(&self, x: &[f64]) -> [f64; 3] {
        let b = 8.0 * self.big * self.big;
        [
            4.0 * self.q * x[0] - b * x[0],
            4.0 * self.q * x[1] - b * x[1],
            4.0 * self.q * x[2],
        ]
    }

    fn hess(&self, x: &[f64]) -> [[f64; 3]; 3] {
        let b = 8.0 * self.big * self.big;
        let mut h = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                h[i][j] = 8.0 * x[i] * x[j];
            }
            h[i][i] += 4.0 * self.q;
        }
        h[0][0] -= b;
        h[1][1] -= b;
        h
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
