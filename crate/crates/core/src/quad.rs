//! Composite Gauss-Legendre rules on intervals and axis-aligned cubes.
//!
//! All nodes are interior to their cell, so weights with a singularity on a
//! cell boundary (e.g. `|x|^gamma` at the origin) are never evaluated there.

use crate::error::{Error, Result};

const GL4_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GL4_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_86,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_86,
];

/// Cell count per axis for a cube of the given side at reference spacing `h`.
pub fn cells_per_axis(side: f64, h: f64) -> usize {
    ((4.0 * side / h).ceil() as usize).max(8)
}

/// Nodes and weights of a composite 4-point rule on `[a, b]`.
pub fn interval_rule(a: f64, b: f64, cells: usize) -> (Vec<f64>, Vec<f64>) {
    let cells = cells.max(1);
    let width = (b - a) / cells as f64;
    let mut nodes = Vec::with_capacity(4 * cells);
    let mut weights = Vec::with_capacity(4 * cells);
    for c in 0..cells {
        let mid = a + (c as f64 + 0.5) * width;
        for (x, w) in GL4_NODES.iter().zip(GL4_WEIGHTS) {
            nodes.push(mid + 0.5 * width * x);
            weights.push(0.5 * width * w);
        }
    }
    (nodes, weights)
}

/// Tensor-product rule on an axis-aligned cube.
#[derive(Debug, Clone)]
pub struct CubeRule {
    pub nodes: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl CubeRule {
    /// Cube `lower + [0, side)^dim` split into `cells^dim` cells.
    pub fn new(dim: usize, lower: [f64; 2], side: f64, cells: usize) -> Result<Self> {
        Self::boxed(dim, lower, [side, side], cells)
    }

    pub fn boxed(dim: usize, lower: [f64; 2], sides: [f64; 2], cells: usize) -> Result<Self> {
        if !(sides[0] > 0.0) || (dim == 2 && !(sides[1] > 0.0)) {
            return Err(Error::Quadrature(format!(
                "non-positive cube side {sides:?}"
            )));
        }
        let (x0, w0) = interval_rule(lower[0], lower[0] + sides[0], cells);
        match dim {
            1 => Ok(Self {
                nodes: x0.iter().map(|&x| [x, 0.0]).collect(),
                weights: w0,
            }),
            2 => {
                let (x1, w1) = interval_rule(lower[1], lower[1] + sides[1], cells);
                let mut nodes = Vec::with_capacity(x0.len() * x1.len());
                let mut weights = Vec::with_capacity(x0.len() * x1.len());
                for (a, wa) in x0.iter().zip(&w0) {
                    for (b, wb) in x1.iter().zip(&w1) {
                        nodes.push([*a, *b]);
                        weights.push(wa * wb);
                    }
                }
                Ok(Self { nodes, weights })
            }
            _ => Err(Error::Parameter(format!("dimension {dim} not supported"))),
        }
    }

    pub fn integrate(&self, mut f: impl FnMut([f64; 2]) -> f64) -> f64 {
        let mut acc = crate::sum::Neumaier::default();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc.add(w * f(*x));
        }
        acc.value()
    }

    pub fn volume(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}
