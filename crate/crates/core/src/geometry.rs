//! Planar primitives and exact integrals of `|x|^(-2β)` over clipped triangles.
//!
//! The clipped integrals use `div(x |x|^(-2β)) = (2 - 2β) |x|^(-2β)`, which
//! turns an area integral into boundary terms: straight edges contribute a
//! smooth 1-D integral and circular arcs about the origin contribute in
//! closed form.

use std::f64::consts::PI;

use crate::quadrature::gauss_legendre;

pub type Point = [f64; 2];

pub fn norm(p: Point) -> f64 {
    p[0].hypot(p[1])
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Signed area, positive for counter-clockwise order.
pub fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * cross(sub(b, a), sub(c, a))
}

pub fn barycentric(tri: &[Point; 3], p: Point) -> [f64; 3] {
    let area = signed_area(tri[0], tri[1], tri[2]);
    let l1 = signed_area(tri[0], p, tri[2]) / area;
    let l2 = signed_area(tri[0], tri[1], p) / area;
    [1.0 - l1 - l2, l1, l2]
}

pub fn from_barycentric(tri: &[Point; 3], l: [f64; 3]) -> Point {
    [
        l[0] * tri[0][0] + l[1] * tri[1][0] + l[2] * tri[2][0],
        l[0] * tri[0][1] + l[1] * tri[1][1] + l[2] * tri[2][1],
    ]
}

pub fn diameter(tri: &[Point; 3]) -> f64 {
    (0..3)
        .map(|k| norm(sub(tri[k], tri[(k + 1) % 3])))
        .fold(0.0, f64::max)
}

fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let d = sub(b, a);
    let len2 = dot(d, d);
    let t = if len2 > 0.0 {
        (dot(sub(p, a), d) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    norm(sub(p, [a[0] + t * d[0], a[1] + t * d[1]]))
}

/// Distance from the origin to a triangle, zero if the triangle contains it.
pub fn origin_distance(tri: &[Point; 3]) -> f64 {
    let l = barycentric(tri, [0.0, 0.0]);
    if l.iter().all(|&x| x >= 0.0) {
        return 0.0;
    }
    (0..3)
        .map(|k| point_segment_distance([0.0, 0.0], tri[k], tri[(k + 1) % 3]))
        .fold(f64::INFINITY, f64::min)
}

fn ccw(tri: &[Point; 3]) -> [Point; 3] {
    if signed_area(tri[0], tri[1], tri[2]) < 0.0 {
        [tri[0], tri[2], tri[1]]
    } else {
        *tri
    }
}

fn ln_cosh(s: f64) -> f64 {
    let a = s.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// `∫_{σ0}^{σ1} cosh(σ)^(1-2β) dσ` by composite Gauss-Legendre on unit panels.
fn cosh_power_integral(s0: f64, s1: f64, beta: f64) -> f64 {
    let gl = gauss_legendre(16);
    let (x, w) = (&gl.0, &gl.1);
    let panels = ((s1 - s0).abs().ceil() as usize).max(1);
    let step = (s1 - s0) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let a = s0 + p as f64 * step;
        let mut acc = 0.0;
        for (xi, wi) in x.iter().zip(w.iter()) {
            let s = a + 0.5 * step * (xi + 1.0);
            acc += wi * ((1.0 - 2.0 * beta) * ln_cosh(s)).exp();
        }
        total += 0.5 * step * acc;
    }
    total
}

/// Flux of `x |x|^(-2β)` through the directed segment `a -> b`, using the
/// right-hand normal (outward for counter-clockwise boundaries).
pub fn edge_flux(a: Point, b: Point, beta: f64) -> f64 {
    let d = sub(b, a);
    let len = norm(d);
    if len == 0.0 {
        return 0.0;
    }
    let e = [d[0] / len, d[1] / len];
    // x·n with n = (e_y, -e_x) is constant along the line.
    let xn = cross(a, e);
    let p = xn.abs();
    let (t0, t1) = (dot(a, e), dot(b, e));
    let scale = t0.abs().max(t1.abs());
    if p <= 1e-15 * scale || p == 0.0 {
        return 0.0;
    }
    let piece = |u0: f64, u1: f64| -> f64 {
        cosh_power_integral((u0 / p).asinh(), (u1 / p).asinh(), beta)
    };
    let integral = if (t0 < 0.0 && t1 > 0.0) || (t0 > 0.0 && t1 < 0.0) {
        piece(t0, 0.0) + piece(0.0, t1)
    } else {
        piece(t0, t1)
    };
    xn.signum() * p.powf(2.0 - 2.0 * beta) * integral
}

/// Exact `∫_T |x|^(-2β) dx` for a triangle not containing the origin in its interior.
pub fn triangle_weighted_measure(tri: &[Point; 3], beta: f64) -> f64 {
    let t = ccw(tri);
    let flux: f64 = (0..3).map(|k| edge_flux(t[k], t[(k + 1) % 3], beta)).sum();
    flux / (2.0 - 2.0 * beta)
}

fn inside(tri: &[Point; 3], p: Point) -> bool {
    barycentric(tri, p).iter().all(|&l| l >= -1e-12)
}

/// Exact `∫_{T ∩ B_ρ} |x|^(-2β) dx` where `B_ρ` is the disc of radius ρ about the origin.
pub fn disc_clip_weighted_measure(tri: &[Point; 3], rho: f64, beta: f64) -> f64 {
    let t = ccw(tri);
    if t.iter().all(|&v| norm(v) <= rho) {
        return triangle_weighted_measure(&t, beta);
    }
    if origin_distance(&t) >= rho {
        return 0.0;
    }
    let mut flux = 0.0;
    let mut angles = Vec::with_capacity(6);
    for k in 0..3 {
        let (a, b) = (t[k], t[(k + 1) % 3]);
        let d = sub(b, a);
        let qa = dot(d, d);
        let qb = 2.0 * dot(a, d);
        let qc = dot(a, a) - rho * rho;
        let disc = qb * qb - 4.0 * qa * qc;
        if disc <= 0.0 || qa == 0.0 {
            continue;
        }
        let sq = disc.sqrt();
        let q = -0.5 * (qb + qb.signum() * sq);
        let (mut r0, mut r1) = if q != 0.0 { (q / qa, qc / q) } else { (-sq / (2.0 * qa), sq / (2.0 * qa)) };
        if r0 > r1 {
            std::mem::swap(&mut r0, &mut r1);
        }
        for r in [r0, r1] {
            if (0.0..=1.0).contains(&r) {
                let p = [a[0] + r * d[0], a[1] + r * d[1]];
                angles.push(p[1].atan2(p[0]));
            }
        }
        let lo = r0.max(0.0);
        let hi = r1.min(1.0);
        if hi > lo {
            let p = [a[0] + lo * d[0], a[1] + lo * d[1]];
            let q = [a[0] + hi * d[0], a[1] + hi * d[1]];
            flux += edge_flux(p, q, beta);
        }
    }
    let arc_scale = rho.powf(2.0 - 2.0 * beta);
    if angles.is_empty() {
        if inside(&t, [rho, 0.0]) {
            flux += arc_scale * 2.0 * PI;
        }
    } else {
        angles.sort_by(f64::total_cmp);
        let n = angles.len();
        for i in 0..n {
            let a0 = angles[i];
            let a1 = if i + 1 < n { angles[i + 1] } else { angles[0] + 2.0 * PI };
            if a1 - a0 <= 0.0 {
                continue;
            }
            let mid = 0.5 * (a0 + a1);
            if inside(&t, [rho * mid.cos(), rho * mid.sin()]) {
                flux += arc_scale * (a1 - a0);
            }
        }
    }
    flux / (2.0 - 2.0 * beta)
}

/// Area of the part of a triangle where the linear interpolant of `vals` is below `level`.
pub fn sublevel_area(tri: &[Point; 3], vals: [f64; 3], level: f64) -> f64 {
    let mut poly: Vec<Point> = Vec::with_capacity(4);
    for k in 0..3 {
        let (p, q) = (tri[k], tri[(k + 1) % 3]);
        let (fp, fq) = (vals[k] - level, vals[(k + 1) % 3] - level);
        if fp < 0.0 {
            poly.push(p);
        }
        if (fp < 0.0) != (fq < 0.0) {
            let s = fp / (fp - fq);
            poly.push([p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])]);
        }
    }
    if poly.len() < 3 {
        return 0.0;
    }
    let mut a = 0.0;
    for k in 0..poly.len() {
        a += cross(poly[k], poly[(k + 1) % poly.len()]);
    }
    (0.5 * a).abs()
}
