//! Graded triangulations of reference domains with the origin on a flat
//! boundary piece.
//!
//! Meshes are built from rings that are scaled copies of the outer boundary
//! about the origin. Ring spacing is uniform away from the origin and
//! geometric inside a core region, so log profiles and the weight
//! `|x|^(-2β)` are resolved down to a configurable core radius.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SmtError};
use crate::geometry::{signed_area, Point};

/// Vertex flag for interior vertices.
pub const FLAG_INTERIOR: u8 = 0;
/// Vertex flag and edge marker for the straight boundary piece through the origin.
pub const FLAG_FLAT: u8 = 1;
/// Vertex flag and edge marker for the remaining boundary.
pub const FLAG_OUTER: u8 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    HalfDisc { radius: f64 },
    /// Origin at the midpoint of the bottom edge.
    Rectangle { width: f64, height: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub shape: Shape,
    pub refinement_level: u32,
    pub grading_exponent: f64,
    /// Innermost ring radius as a fraction of the characteristic radius.
    pub core_radius: f64,
    pub node_budget: usize,
}

impl DomainSpec {
    pub fn half_disc(radius: f64, level: u32) -> Self {
        Self::new(Shape::HalfDisc { radius }, level)
    }

    pub fn rectangle(width: f64, height: f64, level: u32) -> Self {
        Self::new(Shape::Rectangle { width, height }, level)
    }

    pub fn new(shape: Shape, level: u32) -> Self {
        Self {
            shape,
            refinement_level: level,
            grading_exponent: 2.0,
            core_radius: 1e-9,
            node_budget: 2_000_000,
        }
    }

    pub fn with_grading(mut self, g: f64) -> Self {
        self.grading_exponent = g;
        self
    }

    pub fn with_core_radius(mut self, c: f64) -> Self {
        self.core_radius = c;
        self
    }

    pub fn with_node_budget(mut self, budget: usize) -> Self {
        self.node_budget = budget;
        self
    }

    /// Exact area of the described region.
    pub fn exact_area(&self) -> f64 {
        match self.shape {
            Shape::HalfDisc { radius } => 0.5 * std::f64::consts::PI * radius * radius,
            Shape::Rectangle { width, height } => width * height,
        }
    }

    /// Largest ρ such that the half-ball of radius ρ about the origin lies in the region.
    pub fn flat_radius(&self) -> f64 {
        match self.shape {
            Shape::HalfDisc { radius } => radius,
            Shape::Rectangle { width, height } => (0.5 * width).min(height),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        match self.shape {
            Shape::HalfDisc { radius } if !ok(radius) => {
                return Err(SmtError::InvalidDomain(format!("radius {radius}")))
            }
            Shape::Rectangle { width, height } if !ok(width) || !ok(height) => {
                return Err(SmtError::InvalidDomain(format!("rectangle {width} x {height}")))
            }
            _ => {}
        }
        if !(self.grading_exponent >= 1.0 && self.grading_exponent.is_finite()) {
            return Err(SmtError::InvalidDomain(format!(
                "grading exponent {} must be at least 1",
                self.grading_exponent
            )));
        }
        if !(self.core_radius > 0.0 && self.core_radius < 0.5) {
            return Err(SmtError::InvalidDomain(format!("core radius {}", self.core_radius)));
        }
        if self.refinement_level > 16 {
            return Err(SmtError::InvalidDomain(format!(
                "refinement level {}",
                self.refinement_level
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub a: usize,
    pub b: usize,
    pub marker: u8,
}

#[derive(Clone, Debug)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    /// Counter-clockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    pub vertex_flags: Vec<u8>,
    pub origin_vertex: usize,
    pub spec: Option<DomainSpec>,
}

enum Side {
    Arc { radius: f64, theta0: f64, theta1: f64 },
    Segment { a: Point, b: Point },
}

impl Side {
    fn length(&self) -> f64 {
        match *self {
            Side::Arc { radius, theta0, theta1 } => radius * (theta1 - theta0).abs(),
            Side::Segment { a, b } => (b[0] - a[0]).hypot(b[1] - a[1]),
        }
    }

    fn at(&self, t: f64) -> Point {
        match *self {
            Side::Arc { radius, theta0, theta1 } => {
                let th = theta0 + t * (theta1 - theta0);
                [radius * th.cos(), radius * th.sin()]
            }
            Side::Segment { a, b } => [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])],
        }
    }
}

fn outline(shape: Shape) -> Vec<Side> {
    match shape {
        Shape::HalfDisc { radius } => vec![Side::Arc {
            radius,
            theta0: 0.0,
            theta1: std::f64::consts::PI,
        }],
        Shape::Rectangle { width, height } => {
            let w = 0.5 * width;
            vec![
                Side::Segment { a: [w, 0.0], b: [w, height] },
                Side::Segment { a: [w, height], b: [-w, height] },
                Side::Segment { a: [-w, height], b: [-w, 0.0] },
            ]
        }
    }
}

struct RingPlan {
    scales: Vec<f64>,
    counts: Vec<usize>,
}

fn plan_rings(spec: &DomainSpec, sides: &[Side]) -> RingPlan {
    let total: f64 = sides.iter().map(Side::length).sum();
    let rho = total / std::f64::consts::PI;
    let m_out = 6usize << spec.refinement_level;
    let m_core = (m_out / 8).max(8);
    let m_min = sides.len().max(2);
    let h = total / m_out as f64;
    let kappa = std::f64::consts::PI / m_core as f64;
    let g = spec.grading_exponent;
    let spacing = |r: f64| h.min((h * (r / rho).powf(g - 1.0)).max(kappa * r));
    let count = |r: f64| {
        let m = (r / rho * total / spacing(r)).round() as usize;
        m.clamp(m_min, m_out)
    };

    let mut scales = vec![1.0];
    let mut counts = vec![m_out];
    let core = spec.core_radius * rho;
    let mut r = rho;
    loop {
        let s = spacing(r);
        let next = r - s;
        if next < core || next < 0.6 * s {
            break;
        }
        scales.push(next / rho);
        counts.push(count(next));
        r = next;
    }
    RingPlan { scales, counts }
}

/// Point positions and boundary fractions for one ring with `m` segments.
fn ring_points(sides: &[Side], scale: f64, m: usize) -> (Vec<Point>, Vec<f64>) {
    let lengths: Vec<f64> = sides.iter().map(Side::length).collect();
    let total: f64 = lengths.iter().sum();
    let mut per_side: Vec<usize> = lengths
        .iter()
        .map(|l| ((m as f64 * l / total).round() as usize).max(1))
        .collect();
    if sides.len() == 1 {
        per_side[0] = m;
    }
    let mut pts = Vec::new();
    let mut tau = Vec::new();
    let mut before = 0.0;
    for (i, side) in sides.iter().enumerate() {
        let n = per_side[i];
        for j in 0..n {
            let t = j as f64 / n as f64;
            let p = side.at(t);
            pts.push([scale * p[0], scale * p[1]]);
            tau.push((before + t * lengths[i]) / total);
        }
        before += lengths[i];
    }
    let end = sides.last().expect("outline has sides").at(1.0);
    pts.push([scale * end[0], scale * end[1]]);
    tau.push(1.0);
    // Endpoints sit exactly on the flat boundary.
    pts[0][1] = 0.0;
    let last = pts.len() - 1;
    pts[last][1] = 0.0;
    (pts, tau)
}

/// Builds the graded mesh described by `spec`.
pub fn build_mesh(spec: &DomainSpec) -> Result<Mesh> {
    spec.validate()?;
    let sides = outline(spec.shape);
    let plan = plan_rings(spec, &sides);
    let estimated: usize = 1 + plan.counts.iter().map(|m| m + 1).sum::<usize>();
    if estimated > spec.node_budget {
        return Err(SmtError::ResourceLimit {
            estimated,
            budget: spec.node_budget,
        });
    }

    let mut vertices: Vec<Point> = Vec::with_capacity(estimated);
    let mut flags: Vec<u8> = Vec::with_capacity(estimated);
    let mut rings: Vec<(Vec<usize>, Vec<f64>)> = Vec::with_capacity(plan.scales.len());
    for (k, (&s, &m)) in plan.scales.iter().zip(&plan.counts).enumerate() {
        let (pts, tau) = ring_points(&sides, s, m);
        let n = pts.len();
        let mut ids = Vec::with_capacity(n);
        for (j, p) in pts.into_iter().enumerate() {
            ids.push(vertices.len());
            vertices.push(p);
            flags.push(if k == 0 {
                FLAG_OUTER
            } else if j == 0 || j + 1 == n {
                FLAG_FLAT
            } else {
                FLAG_INTERIOR
            });
        }
        rings.push((ids, tau));
    }
    let origin_vertex = vertices.len();
    vertices.push([0.0, 0.0]);
    flags.push(FLAG_FLAT);

    let mut triangles = Vec::new();
    for pair in rings.windows(2) {
        zipper(&pair[0], &pair[1], &mut triangles);
    }
    let (inner, _) = rings.last().expect("at least one ring");
    for w in inner.windows(2) {
        triangles.push([origin_vertex, w[0], w[1]]);
    }
    for (t, tri) in triangles.iter_mut().enumerate() {
        let a = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
        if a < 0.0 {
            tri.swap(1, 2);
        } else if a == 0.0 {
            return Err(SmtError::MeshQuality { triangle: t, area: a });
        }
    }

    let mut boundary_edges = Vec::new();
    let (outer, _) = &rings[0];
    for w in outer.windows(2) {
        boundary_edges.push(BoundaryEdge { a: w[0], b: w[1], marker: FLAG_OUTER });
    }
    let mut right = Vec::with_capacity(rings.len() + 1);
    let mut left = Vec::with_capacity(rings.len() + 1);
    for (ids, _) in &rings {
        right.push(ids[0]);
        left.push(*ids.last().expect("ring not empty"));
    }
    right.push(origin_vertex);
    left.push(origin_vertex);
    for w in right.windows(2).chain(left.windows(2)) {
        boundary_edges.push(BoundaryEdge { a: w[0], b: w[1], marker: FLAG_FLAT });
    }

    Ok(Mesh {
        vertices,
        triangles,
        boundary_edges,
        vertex_flags: flags,
        origin_vertex,
        spec: Some(*spec),
    })
}

/// Triangulates the band between two rings by merging along the boundary fraction.
fn zipper(outer: &(Vec<usize>, Vec<f64>), inner: &(Vec<usize>, Vec<f64>), out: &mut Vec<[usize; 3]>) {
    let (oid, otau) = outer;
    let (iid, itau) = inner;
    let (mut i, mut o) = (0usize, 0usize);
    while i + 1 < iid.len() || o + 1 < oid.len() {
        let advance_inner = if i + 1 == iid.len() {
            false
        } else if o + 1 == oid.len() {
            true
        } else {
            itau[i + 1] <= otau[o + 1]
        };
        if advance_inner {
            out.push([iid[i], iid[i + 1], oid[o]]);
            i += 1;
        } else {
            out.push([iid[i], oid[o + 1], oid[o]]);
            o += 1;
        }
    }
}

impl Mesh {
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        signed_area(a, b, c)
    }

    pub fn area(&self) -> f64 {
        crate::sum::ordered_sum(
            &(0..self.num_triangles())
                .map(|t| self.triangle_area(t))
                .collect::<Vec<_>>(),
        )
    }

    /// Largest distance from the origin to a neighbouring vertex.
    pub fn origin_mesh_size(&self) -> f64 {
        let o = self.origin_vertex;
        self.triangles
            .iter()
            .filter(|t| t.contains(&o))
            .flat_map(|t| t.iter().copied())
            .filter(|&v| v != o)
            .map(|v| crate::geometry::norm(self.vertices[v]))
            .fold(0.0, f64::max)
    }

    /// Smallest distance from the origin to a vertex off the flat boundary piece.
    pub fn clearance(&self) -> f64 {
        self.vertices
            .iter()
            .zip(&self.vertex_flags)
            .filter(|(_, &f)| f == FLAG_OUTER)
            .map(|(p, _)| crate::geometry::norm(*p))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_edge_length(&self) -> f64 {
        let mut h: f64 = 0.0;
        for t in 0..self.num_triangles() {
            let p = self.triangle_points(t);
            for k in 0..3 {
                let (a, b) = (p[k], p[(k + 1) % 3]);
                h = h.max((a[0] - b[0]).hypot(a[1] - b[1]));
            }
        }
        h
    }

    /// Checks the structural invariants of the mesh.
    pub fn check(&self) -> Result<()> {
        let nv = self.num_vertices();
        if self.vertex_flags.len() != nv {
            return Err(SmtError::MeshFormat("flag count differs from vertex count".into()));
        }
        if self.origin_vertex >= nv || self.vertices[self.origin_vertex] != [0.0, 0.0] {
            return Err(SmtError::MeshFormat("origin vertex is not at (0,0)".into()));
        }
        let o = self.origin_vertex;
        if !self.boundary_edges.iter().any(|e| e.a == o || e.b == o) {
            return Err(SmtError::MeshFormat("origin is not on a boundary edge".into()));
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(SmtError::MeshFormat(format!("triangle {t} has a bad index")));
            }
            let a = self.triangle_area(t);
            if a <= 0.0 {
                return Err(SmtError::MeshQuality { triangle: t, area: a });
            }
        }
        let mut edges = std::collections::HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_insert(0usize) += 1;
            }
        }
        let mut boundary: std::collections::HashSet<(usize, usize)> = edges
            .iter()
            .filter(|(_, &c)| c == 1)
            .map(|(&e, _)| e)
            .collect();
        if edges.values().any(|&c| c > 2) {
            return Err(SmtError::MeshFormat("edge shared by more than two triangles".into()));
        }
        for e in &self.boundary_edges {
            if !boundary.remove(&(e.a.min(e.b), e.a.max(e.b))) {
                return Err(SmtError::MeshFormat(format!(
                    "marked edge ({}, {}) is not a boundary edge",
                    e.a, e.b
                )));
            }
        }
        if !boundary.is_empty() {
            return Err(SmtError::MeshFormat(format!(
                "{} boundary edges are unmarked or the mesh has hanging nodes",
                boundary.len()
            )));
        }
        Ok(())
    }

    /// Writes the ASCII exchange format.
    pub fn write_ascii<W: Write>(&self, mut w: W) -> Result<()> {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} {} {}",
            self.num_vertices(),
            self.num_triangles(),
            self.boundary_edges.len()
        );
        for (p, f) in self.vertices.iter().zip(&self.vertex_flags) {
            let _ = writeln!(s, "{:.16e} {:.16e} {}", p[0], p[1], f);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        for e in &self.boundary_edges {
            let _ = writeln!(s, "{} {} {}", e.a, e.b, e.marker);
        }
        w.write_all(s.as_bytes())?;
        Ok(())
    }

    /// Reads the ASCII exchange format. The origin vertex is the vertex at (0,0).
    pub fn read_ascii<R: BufRead>(r: R) -> Result<Mesh> {
        let mut lines = r.lines();
        let mut next = |what: &str| -> Result<Vec<String>> {
            loop {
                match lines.next() {
                    Some(l) => {
                        let l = l?;
                        let toks: Vec<String> = l.split_whitespace().map(str::to_owned).collect();
                        if !toks.is_empty() {
                            return Ok(toks);
                        }
                    }
                    None => return Err(SmtError::MeshFormat(format!("missing {what}"))),
                }
            }
        };
        fn num<T: std::str::FromStr>(s: &str) -> Result<T> {
            s.parse()
                .map_err(|_| SmtError::MeshFormat(format!("cannot parse {s:?}")))
        }
        let head = next("header")?;
        if head.len() != 3 {
            return Err(SmtError::MeshFormat("header must be `NV NT NB`".into()));
        }
        let (nv, nt, nb): (usize, usize, usize) = (num(&head[0])?, num(&head[1])?, num(&head[2])?);
        let mut vertices = Vec::with_capacity(nv);
        let mut flags = Vec::with_capacity(nv);
        for _ in 0..nv {
            let t = next("vertex")?;
            if t.len() != 3 {
                return Err(SmtError::MeshFormat("vertex line must be `x y flag`".into()));
            }
            vertices.push([num(&t[0])?, num(&t[1])?]);
            flags.push(num(&t[2])?);
        }
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let t = next("triangle")?;
            if t.len() != 3 {
                return Err(SmtError::MeshFormat("triangle line must be `i j k`".into()));
            }
            triangles.push([num(&t[0])?, num(&t[1])?, num(&t[2])?]);
        }
        let mut boundary_edges = Vec::with_capacity(nb);
        for _ in 0..nb {
            let t = next("boundary edge")?;
            if t.len() != 3 {
                return Err(SmtError::MeshFormat("edge line must be `i j marker`".into()));
            }
            boundary_edges.push(BoundaryEdge {
                a: num(&t[0])?,
                b: num(&t[1])?,
                marker: num(&t[2])?,
            });
        }
        let origin_vertex = vertices
            .iter()
            .position(|p| *p == [0.0, 0.0])
            .ok_or_else(|| SmtError::MeshFormat("no vertex at the origin".into()))?;
        let mesh = Mesh {
            vertices,
            triangles,
            boundary_edges,
            vertex_flags: flags,
            origin_vertex,
            spec: None,
        };
        mesh.check()?;
        Ok(mesh)
    }
}
