//! Nodal fields and point location.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Result, SmtError};
use crate::geometry::{barycentric, Point};
use crate::mesh::Mesh;

/// Piecewise-linear field given by its vertex values.
#[derive(Clone, Debug)]
pub struct ScalarField {
    pub mesh: Arc<Mesh>,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.num_vertices() {
            return Err(SmtError::InvalidParameter(format!(
                "field has {} values for {} vertices",
                values.len(),
                mesh.num_vertices()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(SmtError::InvalidParameter(format!("non-finite value at vertex {i}")));
        }
        Ok(Self { mesh, values })
    }

    pub fn from_fn<F: Fn(Point) -> f64>(mesh: Arc<Mesh>, f: F) -> Self {
        let values = mesh.vertices.iter().map(|&p| f(p)).collect();
        Self { mesh, values }
    }

    pub fn constant(mesh: Arc<Mesh>, c: f64) -> Self {
        let values = vec![c; mesh.num_vertices()];
        Self { mesh, values }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// CSV with header `vertex,x,y,value`.
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(64 * self.values.len());
        s.push_str("vertex,x,y,value\n");
        for (i, (p, v)) in self.mesh.vertices.iter().zip(&self.values).enumerate() {
            let _ = writeln!(s, "{i},{:.16e},{:.16e},{:.16e}", p[0], p[1], v);
        }
        s
    }
}

/// Walking point location over triangle adjacency.
pub struct Locator<'m> {
    mesh: &'m Mesh,
    neighbours: Vec<[Option<usize>; 3]>,
    vertex_triangle: Vec<usize>,
}

impl<'m> Locator<'m> {
    pub fn new(mesh: &'m Mesh) -> Self {
        let mut edges = std::collections::HashMap::with_capacity(3 * mesh.num_triangles());
        let mut neighbours = vec![[None; 3]; mesh.num_triangles()];
        let mut vertex_triangle = vec![usize::MAX; mesh.num_vertices()];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            for k in 0..3 {
                vertex_triangle[tri[k]] = vertex_triangle[tri[k]].min(t);
                // Edge opposite local vertex k.
                let (a, b) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
                let key = (a.min(b), a.max(b));
                if let Some((s, j)) = edges.remove(&key) {
                    neighbours[t][k] = Some(s);
                    let nb: &mut [Option<usize>; 3] = &mut neighbours[s];
                    nb[j] = Some(t);
                } else {
                    edges.insert(key, (t, k));
                }
            }
        }
        Self { mesh, neighbours, vertex_triangle }
    }

    /// Triangle containing `p` and its barycentric coordinates, starting the walk at `hint_vertex`.
    pub fn locate(&self, p: Point, hint_vertex: usize) -> Option<(usize, [f64; 3])> {
        let mut t = self.vertex_triangle[hint_vertex];
        let tol = -1e-12;
        for _ in 0..(4 * self.mesh.num_triangles()).min(200_000) {
            let tri = self.mesh.triangle_points(t);
            let l = barycentric(&tri, p);
            let (k, worst) = l
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
            if worst >= tol {
                return Some((t, l));
            }
            match self.neighbours[t][k] {
                Some(next) => t = next,
                None => return self.scan(p),
            }
        }
        self.scan(p)
    }

    fn scan(&self, p: Point) -> Option<(usize, [f64; 3])> {
        (0..self.mesh.num_triangles()).find_map(|t| {
            let l = barycentric(&self.mesh.triangle_points(t), p);
            l.iter().all(|&v| v >= -1e-12).then_some((t, l))
        })
    }

    /// Interpolated value of a nodal field at `p`, or `None` outside the mesh.
    pub fn eval(&self, values: &[f64], p: Point, hint_vertex: usize) -> Option<f64> {
        let (t, l) = self.locate(p, hint_vertex)?;
        let [a, b, c] = self.mesh.triangles[t];
        Some(l[0] * values[a] + l[1] * values[b] + l[2] * values[c])
    }
}
