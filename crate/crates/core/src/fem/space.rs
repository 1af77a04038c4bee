use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numfmt::sig17;

/// Strictly increasing node coordinates spanning `[a, b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh1D {
    nodes: Vec<f64>,
}

impl Mesh1D {
    pub fn new(nodes: Vec<f64>) -> Result<Mesh1D> {
        if nodes.len() < 2 {
            return Err(Error::Input("a mesh needs at least one element".into()));
        }
        if nodes.windows(2).any(|w| !(w[0] < w[1])) || nodes.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("mesh nodes must be finite and strictly increasing".into()));
        }
        Ok(Mesh1D { nodes })
    }

    /// Uniform mesh of `n` elements on `[a, b]`; the end nodes are exact.
    pub fn uniform(a: f64, b: f64, n: usize) -> Result<Mesh1D> {
        if n == 0 || !(a < b) {
            return Err(Error::Input(format!("invalid uniform mesh [{a}, {b}] with {n} elements")));
        }
        let mut nodes: Vec<f64> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
        nodes[n] = b;
        Mesh1D::new(nodes)
    }

    pub fn unit(n: usize) -> Result<Mesh1D> {
        Mesh1D::uniform(0.0, 1.0, n)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn elements(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn a(&self) -> f64 {
        self.nodes[0]
    }

    pub fn b(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    /// `W^{1,p}_0`: free coefficients are the interior nodes.
    Dirichlet,
    /// `W^{1,p}`: every node is free.
    Neumann,
}

/// P1 space on a mesh with its boundary condition and quadrature order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeSpace {
    mesh: Mesh1D,
    bc: BoundaryCondition,
    quad_points: usize,
}

impl FeSpace {
    pub fn new(mesh: Mesh1D, bc: BoundaryCondition) -> FeSpace {
        FeSpace {
            mesh,
            bc,
            quad_points: 4,
        }
    }

    pub fn with_quadrature(mut self, points: usize) -> Result<FeSpace> {
        if !(1..=5).contains(&points) {
            return Err(Error::Input("Gauss rules with 1..=5 points are available".into()));
        }
        self.quad_points = points;
        Ok(self)
    }

    pub fn mesh(&self) -> &Mesh1D {
        &self.mesh
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn quad_points(&self) -> usize {
        self.quad_points
    }

    /// Number of free coefficients: `N-1` (Dirichlet) or `N+1` (Neumann).
    pub fn dim(&self) -> usize {
        match self.bc {
            BoundaryCondition::Dirichlet => self.mesh.elements() - 1,
            BoundaryCondition::Neumann => self.mesh.elements() + 1,
        }
    }

    /// Free-coefficient index of mesh node `node`, if that node is free.
    pub fn free_index(&self, node: usize) -> Option<usize> {
        match self.bc {
            BoundaryCondition::Neumann => Some(node),
            BoundaryCondition::Dirichlet => {
                if node == 0 || node == self.mesh.elements() {
                    None
                } else {
                    Some(node - 1)
                }
            }
        }
    }

    /// Full nodal vector (boundary values included) from free coefficients.
    pub fn nodal_values(&self, coeffs: &[f64]) -> Vec<f64> {
        debug_assert_eq!(coeffs.len(), self.dim());
        match self.bc {
            BoundaryCondition::Neumann => coeffs.to_vec(),
            BoundaryCondition::Dirichlet => {
                let mut v = Vec::with_capacity(coeffs.len() + 2);
                v.push(0.0);
                v.extend_from_slice(coeffs);
                v.push(0.0);
                v
            }
        }
    }
}

/// Gauss–Legendre rule on `[-1, 1]` as `(points, weights)`.
pub(crate) fn gauss_rule(n: usize) -> (&'static [f64], &'static [f64]) {
    match n {
        1 => (&[0.0], &[2.0]),
        2 => (&[-0.577_350_269_189_625_8, 0.577_350_269_189_625_8], &[1.0, 1.0]),
        3 => (
            &[-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4],
            &[0.555_555_555_555_555_6, 0.888_888_888_888_889, 0.555_555_555_555_555_6],
        ),
        4 => (
            &[
                -0.861_136_311_594_052_6,
                -0.339_981_043_584_856_3,
                0.339_981_043_584_856_3,
                0.861_136_311_594_052_6,
            ],
            &[
                0.347_854_845_137_453_9,
                0.652_145_154_862_546_1,
                0.652_145_154_862_546_1,
                0.347_854_845_137_453_9,
            ],
        ),
        _ => (
            &[
                -0.906_179_845_938_664,
                -0.538_469_310_105_683,
                0.0,
                0.538_469_310_105_683,
                0.906_179_845_938_664,
            ],
            &[
                0.236_926_885_056_189_1,
                0.478_628_670_499_366_5,
                0.568_888_888_888_888_9,
                0.478_628_670_499_366_5,
                0.236_926_885_056_189_1,
            ],
        ),
    }
}

/// Nodal coefficients of a P1 function together with its space.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteFn {
    space: Arc<FeSpace>,
    coeffs: Vec<f64>,
}

impl DiscreteFn {
    pub fn new(space: Arc<FeSpace>, coeffs: Vec<f64>) -> Result<DiscreteFn> {
        if coeffs.len() != space.dim() {
            return Err(Error::Mismatch(format!(
                "{} coefficients for a space of dimension {}",
                coeffs.len(),
                space.dim()
            )));
        }
        Ok(DiscreteFn { space, coeffs })
    }

    pub fn zero(space: Arc<FeSpace>) -> DiscreteFn {
        let n = space.dim();
        DiscreteFn {
            space,
            coeffs: vec![0.0; n],
        }
    }

    /// Nodal interpolant of `g`; Dirichlet boundary values are forced to 0.
    pub fn interpolate(space: Arc<FeSpace>, g: impl Fn(f64) -> f64) -> DiscreteFn {
        let coeffs = space
            .mesh()
            .nodes()
            .iter()
            .enumerate()
            .filter(|(i, _)| space.free_index(*i).is_some())
            .map(|(_, &x)| g(x))
            .collect();
        DiscreteFn { space, coeffs }
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn nodal_values(&self) -> Vec<f64> {
        self.space.nodal_values(&self.coeffs)
    }

    /// CSV with header `node_coordinate,value`, boundary nodes included.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("node_coordinate,value\n");
        for (x, v) in self.space.mesh().nodes().iter().zip(self.nodal_values()) {
            let _ = writeln!(out, "{},{}", sig17(*x), sig17(v));
        }
        out
    }

    /// Parses [`DiscreteFn::to_csv`] output back onto `space`.
    pub fn from_csv(space: Arc<FeSpace>, text: &str) -> Result<DiscreteFn> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next() {
            Some(h) if h.trim() == "node_coordinate,value" => {}
            _ => return Err(Error::Input("missing `node_coordinate,value` header".into())),
        }
        let nodes = space.mesh().nodes();
        let mut values = Vec::with_capacity(nodes.len());
        for (row, line) in lines.enumerate() {
            let mut cols = line.split(',');
            let (x, v) = match (cols.next(), cols.next(), cols.next()) {
                (Some(x), Some(v), None) => (x.trim(), v.trim()),
                _ => return Err(Error::Input(format!("row {row}: expected two columns"))),
            };
            let x: f64 = x
                .parse()
                .map_err(|_| Error::Input(format!("row {row}: bad coordinate `{x}`")))?;
            let v: f64 = v
                .parse()
                .map_err(|_| Error::Input(format!("row {row}: bad value `{v}`")))?;
            match nodes.get(row) {
                Some(&xn) if (xn - x).abs() <= 1e-12 * (1.0 + xn.abs()) => {}
                _ => return Err(Error::Mismatch(format!("row {row}: coordinate {x} is not a mesh node"))),
            }
            values.push(v);
        }
        if values.len() != nodes.len() {
            return Err(Error::Mismatch(format!(
                "{} rows for a mesh with {} nodes",
                values.len(),
                nodes.len()
            )));
        }
        let coeffs = values
            .iter()
            .enumerate()
            .filter_map(|(i, &v)| space.free_index(i).map(|_| v))
            .collect();
        if space.bc() == BoundaryCondition::Dirichlet && (values[0] != 0.0 || values[values.len() - 1] != 0.0) {
            return Err(Error::Input("Dirichlet boundary values must be 0".into()));
        }
        DiscreteFn::new(space, coeffs)
    }
}
