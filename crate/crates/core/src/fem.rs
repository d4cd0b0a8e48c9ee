//! Piecewise-linear stiffness and mass operators.

use std::sync::Arc;

use crate::error::{Result, SmtError};
use crate::mesh::Mesh;
use crate::sparse::{CsrMatrix, NeumannSolution, NeumannSolver};
use crate::sum::{ordered_sum, par_sum};

/// Relative area below which a triangle counts as degenerate.
const AREA_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct Operators {
    pub stiffness: CsrMatrix,
    pub mass: CsrMatrix,
    /// Mass matrix applied to the constant 1, i.e. `∫ φ_i`.
    pub load_one: Vec<f64>,
    pub area: f64,
}

/// Gradients of the three barycentric functions and the area of a triangle.
pub fn p1_gradients(mesh: &Mesh, t: usize) -> ([[f64; 2]; 3], f64) {
    let [p0, p1, p2] = mesh.triangle_points(t);
    let area = mesh.triangle_area(t);
    let inv = 0.5 / area;
    (
        [
            [(p1[1] - p2[1]) * inv, (p2[0] - p1[0]) * inv],
            [(p2[1] - p0[1]) * inv, (p0[0] - p2[0]) * inv],
            [(p0[1] - p1[1]) * inv, (p1[0] - p0[0]) * inv],
        ],
        area,
    )
}

pub fn assemble_operators(mesh: &Mesh) -> Result<Operators> {
    let n = mesh.num_vertices();
    let mut k = Vec::with_capacity(9 * mesh.num_triangles());
    let mut m = Vec::with_capacity(9 * mesh.num_triangles());
    let mut load = vec![0.0; n];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let area = mesh.triangle_area(t);
        let [a, b, c] = mesh.triangle_points(t);
        let longest = [(a, b), (b, c), (c, a)]
            .iter()
            .map(|(p, q)| (p[0] - q[0]).hypot(p[1] - q[1]))
            .fold(0.0, f64::max);
        if !(area > AREA_TOLERANCE * longest * longest) {
            return Err(SmtError::MeshQuality { triangle: t, area });
        }
        let (g, _) = p1_gradients(mesh, t);
        for i in 0..3 {
            load[tri[i]] += area / 3.0;
            for j in 0..3 {
                let kij = area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                k.push((tri[i], tri[j], kij));
                let mij = if i == j { area / 6.0 } else { area / 12.0 };
                m.push((tri[i], tri[j], mij));
            }
        }
    }
    let area = ordered_sum(&load);
    Ok(Operators {
        stiffness: CsrMatrix::from_triplets(n, k),
        mass: CsrMatrix::from_triplets(n, m),
        load_one: load,
        area,
    })
}

/// A mesh with its assembled operators and a factored Neumann solver.
#[derive(Debug)]
pub struct Discretization {
    pub mesh: Arc<Mesh>,
    pub ops: Operators,
    solver: NeumannSolver,
}

impl Discretization {
    pub fn new(mesh: Arc<Mesh>) -> Result<Self> {
        let ops = assemble_operators(&mesh)?;
        // Pin a vertex far from the origin.
        let pinned = (0..mesh.num_vertices())
            .max_by(|&a, &b| {
                let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
                pa[0].hypot(pa[1]).total_cmp(&pb[0].hypot(pb[1])).then(b.cmp(&a))
            })
            .expect("mesh has vertices");
        let solver = NeumannSolver::new(&ops.stiffness, &ops.load_one, pinned)?;
        Ok(Self { mesh, ops, solver })
    }

    /// Zero-mean solution of `K u = rhs` for a compatible right-hand side.
    pub fn solve_neumann(&self, rhs: &[f64]) -> Result<NeumannSolution> {
        self.solver.solve(&self.ops.stiffness, rhs)
    }

    /// `∫|∇u|²`, summed element by element so constants give exactly zero.
    pub fn energy(&self, u: &[f64]) -> f64 {
        let mesh = &self.mesh;
        par_sum(mesh.num_triangles(), |t| {
            let (g, area) = p1_gradients(mesh, t);
            let [a, b, c] = mesh.triangles[t];
            let gx = g[0][0] * u[a] + g[1][0] * u[b] + g[2][0] * u[c];
            let gy = g[0][1] * u[a] + g[1][1] * u[b] + g[2][1] * u[c];
            area * (gx * gx + gy * gy)
        })
    }

    pub fn integral(&self, u: &[f64]) -> f64 {
        ordered_sum(&u.iter().zip(&self.ops.load_one).map(|(a, b)| a * b).collect::<Vec<_>>())
    }

    pub fn mean(&self, u: &[f64]) -> f64 {
        self.integral(u) / self.ops.area
    }
}
