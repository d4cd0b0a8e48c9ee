//! Quadrature for integrals against the weight `|x|^(-2β)`.
//!
//! Triangles away from the origin use collapsed Gauss-Legendre product rules,
//! refined by subdivision when they sit close to the origin relative to their
//! size. Triangles with a vertex at the origin are split dyadically toward it:
//! each level contributes three regular sub-triangles, and the innermost copy
//! is replaced by its exact weighted measure times the value at the origin.

use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SmtError};
use crate::geometry::{
    diameter, disc_clip_weighted_measure, from_barycentric, norm, origin_distance, signed_area,
    triangle_weighted_measure, Point,
};
use crate::mesh::Mesh;
use crate::sum::{ordered_sum, par_sum};

type GaussRule = Arc<(Vec<f64>, Vec<f64>)>;

/// Gauss-Legendre nodes and weights on `[-1, 1]`, cached per order.
pub fn gauss_legendre(n: usize) -> Arc<(Vec<f64>, Vec<f64>)> {
    static CACHE: OnceLock<std::sync::Mutex<Vec<Option<GaussRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| std::sync::Mutex::new(vec![None; 129]));
    if n < 129 {
        let mut c = cache.lock().expect("quadrature cache poisoned");
        if let Some(r) = &c[n] {
            return r.clone();
        }
        let r = Arc::new(compute_gauss_legendre(n));
        c[n] = Some(r.clone());
        return r;
    }
    Arc::new(compute_gauss_legendre(n))
}

fn compute_gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre order must be positive");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Reference triangle rule in barycentric coordinates; weights sum to one.
#[derive(Clone, Debug)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

/// Collapsed product rule with `order²` points, exact for polynomials of degree `2·order - 2`.
pub fn collapsed_rule(order: usize) -> TriangleRule {
    let gl = gauss_legendre(order);
    let (x, w) = (&gl.0, &gl.1);
    let mut points = Vec::with_capacity(order * order);
    let mut weights = Vec::with_capacity(order * order);
    for i in 0..order {
        let a = 0.5 * (x[i] + 1.0);
        for j in 0..order {
            let t = 0.5 * (x[j] + 1.0);
            let b = t * (1.0 - a);
            points.push([1.0 - a - b, a, b]);
            weights.push(0.5 * w[i] * w[j] * (1.0 - a));
        }
    }
    TriangleRule { points, weights }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureOptions {
    /// Collapsed order for triangles far from the origin.
    pub far_order: usize,
    /// Collapsed order for triangles at moderate distance and for dyadic pieces.
    pub near_order: usize,
    /// Triangles with distance/diameter at least this use `far_order`.
    pub far_ratio: f64,
    /// Triangles with distance/diameter below this are subdivided.
    pub near_ratio: f64,
    /// Maximum subdivision depth for near triangles.
    pub max_split: u32,
    /// Dyadic depth for triangles touching the origin.
    pub depth: u32,
    /// Relative accuracy target for the constant integrand.
    pub tolerance: f64,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            far_order: 3,
            near_order: 6,
            far_ratio: 4.0,
            near_ratio: 1.0,
            max_split: 12,
            depth: 30,
            tolerance: 1e-8,
        }
    }
}

/// A quadrature point in barycentric coordinates of its mesh triangle; the
/// weight already includes `|x|^(-2β)` and the area element.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RulePoint {
    pub bary: [f64; 3],
    pub weight: f64,
}

#[derive(Clone, Debug, Default)]
struct Emitted {
    points: Vec<RulePoint>,
    warnings: Vec<String>,
}

fn emit_regular(
    parent: &[Point; 3],
    sub: [[f64; 3]; 3],
    beta: f64,
    opts: &QuadratureOptions,
    split: u32,
    out: &mut Emitted,
) {
    let tri = [
        from_barycentric(parent, sub[0]),
        from_barycentric(parent, sub[1]),
        from_barycentric(parent, sub[2]),
    ];
    let diam = diameter(&tri);
    let ratio = origin_distance(&tri) / diam;
    if ratio < opts.near_ratio {
        if split < opts.max_split {
            for child in split4(sub) {
                emit_regular(parent, child, beta, opts, split + 1, out);
            }
            return;
        }
        out.warnings.push(format!(
            "near-origin subdivision exhausted at depth {split} (distance/diameter {ratio:.3})"
        ));
    }
    let order = if ratio >= opts.far_ratio {
        opts.far_order
    } else {
        opts.near_order
    };
    push_rule(parent, sub, &tri, beta, order, out);
}

fn push_rule(
    parent: &[Point; 3],
    sub: [[f64; 3]; 3],
    tri: &[Point; 3],
    beta: f64,
    order: usize,
    out: &mut Emitted,
) {
    let rule = rule_cache(order);
    let area = signed_area(tri[0], tri[1], tri[2]).abs();
    for (l, w) in rule.points.iter().zip(&rule.weights) {
        let bary = combine(sub, *l);
        let x = from_barycentric(parent, bary);
        let weight = w * area * norm(x).powf(-2.0 * beta);
        out.points.push(RulePoint { bary, weight });
    }
}

fn rule_cache(order: usize) -> Arc<TriangleRule> {
    static CACHE: OnceLock<std::sync::Mutex<Vec<Option<Arc<TriangleRule>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| std::sync::Mutex::new(vec![None; 33]));
    let mut c = cache.lock().expect("rule cache poisoned");
    let slot = order.min(32);
    if let Some(r) = &c[slot] {
        return r.clone();
    }
    let r = Arc::new(collapsed_rule(slot));
    c[slot] = Some(r.clone());
    r
}

fn combine(sub: [[f64; 3]; 3], l: [f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (k, o) in out.iter_mut().enumerate() {
        *o = l[0] * sub[0][k] + l[1] * sub[1][k] + l[2] * sub[2][k];
    }
    out
}

fn mid(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])]
}

fn split4(t: [[f64; 3]; 3]) -> [[[f64; 3]; 3]; 4] {
    let (m01, m12, m20) = (mid(t[0], t[1]), mid(t[1], t[2]), mid(t[2], t[0]));
    [
        [t[0], m01, m20],
        [m01, t[1], m12],
        [m20, m12, t[2]],
        [m01, m12, m20],
    ]
}

const IDENTITY: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

fn emit_singular(tri: &[Point; 3], o: usize, beta: f64, opts: &QuadratureOptions, out: &mut Emitted) {
    let exact = triangle_weighted_measure(tri, beta);
    let start = out.points.len();
    let e_o = IDENTITY[o];
    let e_a = IDENTITY[(o + 1) % 3];
    let e_b = IDENTITY[(o + 2) % 3];
    let scaled = |e: [f64; 3], s: f64| -> [f64; 3] {
        [
            e_o[0] + s * (e[0] - e_o[0]),
            e_o[1] + s * (e[1] - e_o[1]),
            e_o[2] + s * (e[2] - e_o[2]),
        ]
    };
    let mut s = 1.0;
    for _ in 0..opts.depth {
        let (a, b) = (scaled(e_a, s), scaled(e_b, s));
        let (a2, b2) = (scaled(e_a, 0.5 * s), scaled(e_b, 0.5 * s));
        let m = mid(a, b);
        for piece in [[a2, a, m], [a2, m, b2], [b2, m, b]] {
            let p = [
                from_barycentric(tri, piece[0]),
                from_barycentric(tri, piece[1]),
                from_barycentric(tri, piece[2]),
            ];
            push_rule(tri, piece, &p, beta, opts.near_order, out);
        }
        s *= 0.5;
    }
    let tail = exact * s.powf(2.0 - 2.0 * beta);
    out.points.push(RulePoint { bary: e_o, weight: tail });
    let got = ordered_sum(&out.points[start..].iter().map(|p| p.weight).collect::<Vec<_>>());
    let rel = (got - exact).abs() / exact;
    if rel > opts.tolerance {
        out.warnings.push(format!(
            "singular triangle misses the exact weighted measure by {rel:.2e} at depth {}",
            opts.depth
        ));
    }
}

fn origin_corner(tri: &[Point; 3]) -> Option<usize> {
    let d = diameter(tri);
    tri.iter().position(|p| norm(*p) <= 1e-14 * d)
}

fn emit_triangle(tri: &[Point; 3], beta: f64, opts: &QuadratureOptions) -> Emitted {
    let mut out = Emitted::default();
    match origin_corner(tri) {
        Some(o) => emit_singular(tri, o, beta, opts, &mut out),
        None => emit_regular(tri, IDENTITY, beta, opts, 0, &mut out),
    }
    out
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(SmtError::InvalidParameter(format!("β = {beta} lies outside (0, 1)")))
    }
}

/// Result of a single weighted triangle integral.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    /// Bound on the error of replacing the innermost dyadic copy by the value at the origin.
    pub tail_error: f64,
    pub warning: Option<String>,
}

/// `∫_T |x|^(-2β) f dx` for a single triangle.
pub fn singular_quadrature<F>(tri: &[Point; 3], beta: f64, f: F, opts: &QuadratureOptions) -> Result<QuadResult>
where
    F: Fn(Point) -> f64,
{
    check_beta(beta)?;
    let em = emit_triangle(tri, beta, opts);
    let vals: Vec<f64> = em
        .points
        .iter()
        .map(|p| {
            let fx = f(from_barycentric(tri, p.bary));
            if fx == 0.0 { 0.0 } else { p.weight * fx }
        })
        .collect();
    let mut tail_error = 0.0;
    if let Some(o) = origin_corner(tri) {
        let s = 0.5f64.powi(opts.depth as i32);
        let f0 = f([0.0, 0.0]);
        let osc = [(o + 1) % 3, (o + 2) % 3]
            .iter()
            .map(|&k| (f([s * tri[k][0], s * tri[k][1]]) - f0).abs())
            .fold(0.0, f64::max);
        tail_error = osc * triangle_weighted_measure(tri, beta) * s.powf(2.0 - 2.0 * beta);
    }
    let value = ordered_sum(&vals);
    let mut warning = em.warnings.first().cloned();
    if warning.is_none() && tail_error > opts.tolerance * value.abs().max(f64::MIN_POSITIVE) {
        warning = Some(format!("tail error bound {tail_error:.2e} exceeds the tolerance"));
    }
    Ok(QuadResult { value, tail_error, warning })
}

/// Precomputed weighted points for a mesh and exponent β.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub beta: f64,
    pub options: QuadratureOptions,
    pub points: Vec<RulePoint>,
    /// `points[offsets[t]..offsets[t + 1]]` belong to triangle `t`.
    pub offsets: Vec<usize>,
    pub singular: Vec<bool>,
    pub warnings: Vec<String>,
}

impl QuadratureRule {
    pub fn build(mesh: &Mesh, beta: f64, options: QuadratureOptions) -> Result<Self> {
        check_beta(beta)?;
        Ok(Self::build_unchecked(mesh, beta, options))
    }

    /// As [`QuadratureRule::build`] but also accepts β = 0, the unweighted rule.
    pub fn build_unchecked(mesh: &Mesh, beta: f64, options: QuadratureOptions) -> Self {
        let per: Vec<Emitted> = (0..mesh.num_triangles())
            .into_par_iter()
            .map(|t| emit_triangle(&mesh.triangle_points(t), beta, &options))
            .collect();
        let mut offsets = Vec::with_capacity(per.len() + 1);
        let mut points = Vec::with_capacity(per.iter().map(|e| e.points.len()).sum());
        let mut warnings = Vec::new();
        offsets.push(0);
        for (t, e) in per.into_iter().enumerate() {
            points.extend(e.points);
            offsets.push(points.len());
            warnings.extend(e.warnings.into_iter().map(|w| format!("triangle {t}: {w}")));
        }
        let o = mesh.origin_vertex;
        let singular = mesh.triangles.iter().map(|t| t.contains(&o)).collect();
        Self { beta, options, points, offsets, singular, warnings }
    }

    pub fn num_points(&self) -> usize {
        self.points.len()
    }

    /// Sum of the weights on one triangle, i.e. its weighted measure.
    pub fn triangle_weight(&self, t: usize) -> f64 {
        ordered_sum(
            &self.points[self.offsets[t]..self.offsets[t + 1]]
                .iter()
                .map(|p| p.weight)
                .collect::<Vec<_>>(),
        )
    }

    /// `Σ_q w_q g(u(x_q))` for a nodal field `u`.
    pub fn integrate_field<G>(&self, mesh: &Mesh, u: &[f64], g: G) -> f64
    where
        G: Fn(f64) -> f64 + Sync,
    {
        par_sum(mesh.num_triangles(), |t| {
            let [a, b, c] = mesh.triangles[t];
            let (ua, ub, uc) = (u[a], u[b], u[c]);
            self.points[self.offsets[t]..self.offsets[t + 1]]
                .iter()
                .map(|p| p.weight * g(p.bary[0] * ua + p.bary[1] * ub + p.bary[2] * uc))
                .sum::<f64>()
        })
    }
}

/// Integration region for [`weighted_measure`].
pub enum Region<'a> {
    Whole,
    /// Disc of the given radius about the origin, clipped exactly.
    Ball(f64),
    /// Points selected by a predicate, resolved at the quadrature points.
    Where(&'a (dyn Fn(Point) -> bool + Sync)),
}

/// `∫_{region ∩ Ω} |x|^(-2β) dx`.
pub fn weighted_measure(mesh: &Mesh, rule: &QuadratureRule, region: Region<'_>) -> Result<f64> {
    check_beta(rule.beta)?;
    let beta = rule.beta;
    Ok(match region {
        Region::Whole => par_sum(mesh.num_triangles(), |t| rule.triangle_weight(t)),
        Region::Ball(rho) => {
            if !(rho >= 0.0) {
                return Err(SmtError::InvalidParameter(format!("ball radius {rho}")));
            }
            par_sum(mesh.num_triangles(), |t| {
                disc_clip_weighted_measure(&mesh.triangle_points(t), rho, beta)
            })
        }
        Region::Where(pred) => par_sum(mesh.num_triangles(), |t| {
            let tri = mesh.triangle_points(t);
            rule.points[rule.offsets[t]..rule.offsets[t + 1]]
                .iter()
                .filter(|p| pred(from_barycentric(&tri, p.bary)))
                .map(|p| p.weight)
                .sum::<f64>()
        }),
    })
}

/// Closed form `∫_{B_l⁺} |x|^(-2β) dx = π l^(2-2β) / (2 - 2β)` for a flat half-ball.
pub fn half_ball_weighted_measure(beta: f64, l: f64) -> f64 {
    std::f64::consts::PI / (2.0 * (1.0 - beta)) * l.powf(2.0 * (1.0 - beta))
}
