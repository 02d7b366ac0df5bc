//! Order (side-test) and shape (angle cosine) constraints on patch triplets.
//!
//! Coordinates are x-right / y-down. Only the consistency of the sign
//! between a reference and a candidate triangle matters, so the handedness
//! of the convention never leaks into scores.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Point<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Point<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    fn sub(self, o: Self) -> (T, T) {
        (self.x - o.x, self.y - o.y)
    }
}

/// Sign of the z component of `AB x AC`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OrderSign {
    Clockwise,
    Degenerate,
    CounterClockwise,
}

impl OrderSign {
    pub fn as_i8(self) -> i8 {
        match self {
            OrderSign::Clockwise => 1,
            OrderSign::Degenerate => 0,
            OrderSign::CounterClockwise => -1,
        }
    }

    pub fn from_i8(v: i8) -> Option<Self> {
        match v {
            1 => Some(OrderSign::Clockwise),
            0 => Some(OrderSign::Degenerate),
            -1 => Some(OrderSign::CounterClockwise),
            _ => None,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            OrderSign::Clockwise => OrderSign::CounterClockwise,
            OrderSign::Degenerate => OrderSign::Degenerate,
            OrderSign::CounterClockwise => OrderSign::Clockwise,
        }
    }
}

/// Cross product `(b - a) x (c - a)`.
pub fn cross<T: Scalar>(a: Point<T>, b: Point<T>, c: Point<T>) -> T {
    let (abx, aby) = b.sub(a);
    let (acx, acy) = c.sub(a);
    abx * acy - aby * acx
}

/// Side test; `|Z| <= eps` is reported as degenerate.
pub fn order_sign<T: Scalar>(a: Point<T>, b: Point<T>, c: Point<T>, eps: T) -> OrderSign {
    let z = cross(a, b, c);
    if z.abs() <= eps {
        OrderSign::Degenerate
    } else if z > T::zero() {
        OrderSign::Clockwise
    } else {
        OrderSign::CounterClockwise
    }
}

/// Penalty weights for the two constraints.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryConfig<T> {
    pub eta_o: T,
    pub eta_s: T,
    /// Cross-product magnitude (pixels squared) below which a triangle is degenerate.
    pub degeneracy_eps: T,
}

impl<T: Scalar> Default for GeometryConfig<T> {
    fn default() -> Self {
        Self {
            eta_o: T::lit(0.5),
            eta_s: T::one(),
            degeneracy_eps: T::lit(1e-6),
        }
    }
}

impl<T: Scalar> GeometryConfig<T> {
    pub fn new(eta_o: T, eta_s: T) -> Result<Self> {
        let cfg = Self {
            eta_o,
            eta_s,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Both penalties disabled.
    pub fn appearance_only() -> Self {
        Self {
            eta_o: T::zero(),
            eta_s: T::zero(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: T| v >= T::zero() && v <= T::one();
        if !unit(self.eta_o) || !unit(self.eta_s) {
            return Err(Error::InvalidConfig(format!(
                "eta_o={} and eta_s={} must lie in [0, 1]",
                self.eta_o, self.eta_s
            )));
        }
        if !(self.degeneracy_eps > T::zero()) {
            return Err(Error::InvalidConfig("degeneracy_eps must be positive".into()));
        }
        Ok(())
    }
}

/// Multiplicative order penalty; no penalty when the reference order is undefined.
pub fn order_penalty<T: Scalar>(reference: OrderSign, candidate: OrderSign, cfg: &GeometryConfig<T>) -> T {
    if reference == OrderSign::Degenerate || reference == candidate {
        T::one()
    } else {
        T::one() - cfg.eta_o
    }
}

/// Cosines of the interior angles at A, B and C.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleCosines<T>(pub [T; 3]);

/// Interior angle cosines from normalized inner products of the incident edges.
pub fn triangle_angles<T: Scalar>(a: Point<T>, b: Point<T>, c: Point<T>) -> Result<AngleCosines<T>> {
    let min_len = T::epsilon().sqrt();
    let vertex = |p: Point<T>, q: Point<T>, r: Point<T>| -> Result<T> {
        let (ux, uy) = q.sub(p);
        let (vx, vy) = r.sub(p);
        let nu = (ux * ux + uy * uy).sqrt();
        let nv = (vx * vx + vy * vy).sqrt();
        if nu <= min_len || nv <= min_len {
            return Err(Error::DegenerateTriangle("coincident vertices".into()));
        }
        let cos = (ux * vx + uy * vy) / (nu * nv);
        Ok(cos.max(-T::one()).min(T::one()))
    };
    Ok(AngleCosines([
        vertex(a, b, c)?,
        vertex(b, c, a)?,
        vertex(c, a, b)?,
    ]))
}

/// `1 - eta_s * sum |cos_i - cos_i'| / 6` over role-aligned angles.
pub fn shape_penalty<T: Scalar>(
    reference: &AngleCosines<T>,
    candidate: &AngleCosines<T>,
    cfg: &GeometryConfig<T>,
) -> T {
    let diff = reference
        .0
        .iter()
        .zip(&candidate.0)
        .fold(T::zero(), |s, (&r, &c)| s + (r - c).abs());
    T::one() - cfg.eta_s * diff / T::lit(6.0)
}

/// Order sign and angle cosines of a reference triangle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriangleSignature<T> {
    pub order: OrderSign,
    pub angles: AngleCosines<T>,
}

impl<T: Scalar> TriangleSignature<T> {
    /// Signature of a non-degenerate triangle; collinear or coincident centers are rejected.
    pub fn from_points(a: Point<T>, b: Point<T>, c: Point<T>, eps: T) -> Result<Self> {
        let order = order_sign(a, b, c, eps);
        if order == OrderSign::Degenerate {
            return Err(Error::DegenerateTriangle("collinear patch centers".into()));
        }
        Ok(Self {
            order,
            angles: triangle_angles(a, b, c)?,
        })
    }

    /// Penalties `(p_o, p_s)` for a candidate triangle.
    pub fn penalties(&self, candidate: &TriangleSignature<T>, cfg: &GeometryConfig<T>) -> (T, T) {
        (
            order_penalty(self.order, candidate.order, cfg),
            shape_penalty(&self.angles, &candidate.angles, cfg),
        )
    }
}
