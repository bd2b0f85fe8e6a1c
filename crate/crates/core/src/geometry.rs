//! Surfaces, tangent frames, and the `Q` / `P` matrices behind the surface
//! curl `L = Q_x grad` and surface gradient `G = P_x grad`.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::Point;

const SPHERE_TOL: f64 = 1e-9;

/// Geometry on which samples live.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Surface {
    /// The `z = 0` plane with normal `(0, 0, 1)`.
    Plane2D,
    /// The unit sphere; the normal at `x` is `x`.
    Sphere2,
    /// Euclidean space of dimension 2 or 3 (curl-free fields only).
    Euclidean(usize),
}

impl Surface {
    /// Number of significant coordinates of points and vectors.
    pub fn dim(&self) -> usize {
        match self {
            Surface::Plane2D => 2,
            Surface::Sphere2 => 3,
            Surface::Euclidean(d) => *d,
        }
    }

    pub fn is_embedded_surface(&self) -> bool {
        !matches!(self, Surface::Euclidean(_))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Surface::Euclidean(d) if *d != 2 && *d != 3 => Err(Error::Config(format!(
                "euclidean dimension must be 2 or 3, got {d}"
            ))),
            _ => Ok(()),
        }
    }

    /// Unit normal at `x`.
    pub fn normal(&self, x: &Point) -> Result<Vector3<f64>> {
        match self {
            Surface::Plane2D => Ok(Vector3::z()),
            Surface::Sphere2 => {
                let n = x.norm();
                if (n - 1.0).abs() > SPHERE_TOL {
                    return Err(Error::Domain(format!(
                        "point {x:?} is off the unit sphere (|x| = {n})"
                    )));
                }
                Ok(x / n)
            }
            Surface::Euclidean(_) => Err(Error::Domain(
                "euclidean space has no surface normal".into(),
            )),
        }
    }

    /// Normal without the on-surface check; sphere points are projected.
    #[inline]
    pub(crate) fn normal_unchecked(&self, x: &Point) -> Vector3<f64> {
        match self {
            Surface::Sphere2 => x.normalize(),
            _ => Vector3::z(),
        }
    }

    pub fn tangent_frame(&self, x: &Point) -> Result<TangentFrame> {
        let n = self.normal(x)?;
        Ok(match self {
            Surface::Plane2D => TangentFrame {
                d: Vector3::x(),
                e: Vector3::y(),
                n,
            },
            _ => TangentFrame::from_normal(n),
        })
    }

    /// Projects a point onto the surface (identity off the sphere).
    pub fn project(&self, x: &Point) -> Point {
        match self {
            Surface::Sphere2 => x.normalize(),
            Surface::Plane2D => Point::new(x.x, x.y, 0.0),
            Surface::Euclidean(2) => Point::new(x.x, x.y, 0.0),
            Surface::Euclidean(_) => *x,
        }
    }

    /// Surface curl of a scalar whose Euclidean gradient at `x` is `grad`.
    pub fn surface_curl_of_scalar(&self, x: &Point, grad: &Vector3<f64>) -> Result<Vector3<f64>> {
        Ok(q_matrix(&self.normal(x)?) * grad)
    }

    /// Surface gradient of a scalar whose Euclidean gradient at `x` is `grad`.
    pub fn surface_grad_of_scalar(&self, x: &Point, grad: &Vector3<f64>) -> Result<Vector3<f64>> {
        Ok(p_matrix(&self.normal(x)?) * grad)
    }
}

impl std::fmt::Display for Surface {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Surface::Plane2D => write!(f, "plane"),
            Surface::Sphere2 => write!(f, "sphere"),
            Surface::Euclidean(d) => write!(f, "euclidean{d}"),
        }
    }
}

impl std::str::FromStr for Surface {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "plane" => Ok(Surface::Plane2D),
            "sphere" => Ok(Surface::Sphere2),
            "euclidean2" | "r2" => Ok(Surface::Euclidean(2)),
            "euclidean3" | "r3" => Ok(Surface::Euclidean(3)),
            _ => Err(Error::Config(format!(
                "unknown surface '{s}' (expected plane, sphere, euclidean2, or euclidean3)"
            ))),
        }
    }
}

/// Orthonormal frame `{d, e, n}` at a surface point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentFrame {
    pub d: Vector3<f64>,
    pub e: Vector3<f64>,
    pub n: Vector3<f64>,
}

impl TangentFrame {
    /// Frame with `e = normalize(a x n)` and `d = n x e`, where `a` is the
    /// z-axis unless the normal is within ~25 degrees of it.
    pub fn from_normal(n: Vector3<f64>) -> Self {
        let a = if n.z.abs() > 0.9 {
            Vector3::x()
        } else {
            Vector3::z()
        };
        let e = a.cross(&n).normalize();
        let d = n.cross(&e);
        TangentFrame { d, e, n }
    }

    /// Frame rotated in the tangent plane by `angle`.
    pub fn rotated(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let e = self.e * c + self.d * s;
        let d = self.n.cross(&e);
        TangentFrame { d, e, n: self.n }
    }
}

/// `Q v = n x v`.
#[inline]
pub fn q_matrix(n: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -n.z, n.y, n.z, 0.0, -n.x, -n.y, n.x, 0.0)
}

/// `P = I - n n^T`.
#[inline]
pub fn p_matrix(n: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::identity() - n * n.transpose()
}
