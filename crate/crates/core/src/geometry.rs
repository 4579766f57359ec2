//! Uniform interior grids on the box (0, L)^d and the boundary quadrature mesh.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{Scalar, C64};

/// A point in up to three dimensions; unused trailing coordinates are zero.
pub type Point = [f64; 3];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    pub side: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn new(dim: usize, side: f64, n: usize) -> Self {
        GridSpec { dim, side, n }
    }

    pub fn spacing(&self) -> f64 {
        self.side / (self.n as f64 + 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim != 2 && self.dim != 3 {
            return Err(Error::InvalidGrid(format!(
                "dimension must be 2 or 3, got {}",
                self.dim
            )));
        }
        if !(self.side.is_finite() && self.side > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "side length must be positive, got {}",
                self.side
            )));
        }
        if self.n < 3 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 interior nodes per axis, got {}",
                self.n
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryNode {
    pub position: Point,
    /// Outward unit normal.
    pub normal: Point,
    pub weight: f64,
    /// Face id: `2 * axis` for the face at 0, `2 * axis + 1` for the face at L.
    pub face: usize,
    /// Flat indices of the first and second interior nodes along the inward normal.
    pub inward: [usize; 2],
}

#[derive(Clone, Debug)]
pub struct BoundaryMesh {
    pub nodes: Vec<BoundaryNode>,
}

impl BoundaryMesh {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `sum_b w_b a_b conj(c_b)`, accumulated face by face so that opposite
    /// faces with mirrored contributions cancel exactly.
    pub fn inner<A: Scalar, B: Scalar>(&self, a: &[A], c: &[B]) -> C64 {
        debug_assert_eq!(a.len(), self.nodes.len());
        debug_assert_eq!(c.len(), self.nodes.len());
        let mut faces = [C64::new(0.0, 0.0); 6];
        for (node, (x, y)) in self.nodes.iter().zip(a.iter().zip(c)) {
            faces[node.face] += x.to_c64() * y.to_c64().conj() * node.weight;
        }
        faces
            .chunks(2)
            .map(|pair| pair[0] + pair[1])
            .sum()
    }

    /// Weighted `L^p` norm on the boundary.
    pub fn norm<A: Scalar>(&self, values: &[A], p: f64) -> f64 {
        debug_assert_eq!(values.len(), self.nodes.len());
        let sum: f64 = self
            .nodes
            .iter()
            .zip(values)
            .map(|(node, v)| node.weight * v.modulus().powf(p))
            .sum();
        sum.powf(1.0 / p)
    }

    pub fn norm2<A: Scalar>(&self, values: &[A]) -> f64 {
        let sum: f64 = self
            .nodes
            .iter()
            .zip(values)
            .map(|(node, v)| node.weight * v.modulus_sqr())
            .sum();
        sum.sqrt()
    }
}

/// Interior nodes `x_i = (i + 1) h`, flattened row-major with the last axis fastest.
#[derive(Clone, Debug)]
pub struct Grid {
    spec: GridSpec,
    h: f64,
    len: usize,
    strides: [usize; 3],
    boundary: BoundaryMesh,
}

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Grid> {
        spec.validate()?;
        let n = spec.n;
        let d = spec.dim;
        let mut strides = [0usize; 3];
        let mut s = 1;
        for a in (0..d).rev() {
            strides[a] = s;
            s *= n;
        }
        let len = s;
        let h = spec.spacing();
        let mut grid = Grid {
            spec,
            h,
            len,
            strides,
            boundary: BoundaryMesh { nodes: Vec::new() },
        };
        grid.boundary = grid.build_boundary();
        Ok(grid)
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn side(&self) -> f64 {
        self.spec.side
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn strides(&self) -> [usize; 3] {
        self.strides
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.spec.dim as i32)
    }

    pub fn boundary(&self) -> &BoundaryMesh {
        &self.boundary
    }

    pub fn index(&self, idx: [usize; 3]) -> usize {
        (0..self.spec.dim).map(|a| idx[a] * self.strides[a]).sum()
    }

    pub fn multi_index(&self, mut k: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        for a in 0..self.spec.dim {
            idx[a] = k / self.strides[a];
            k %= self.strides[a];
        }
        idx
    }

    pub fn point(&self, k: usize) -> Point {
        let idx = self.multi_index(k);
        let mut x = [0.0; 3];
        for a in 0..self.spec.dim {
            x[a] = (idx[a] as f64 + 1.0) * self.h;
        }
        x
    }

    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.len).map(move |k| self.point(k))
    }

    /// Evaluates `f` at every interior node.
    pub fn sample<T, F: Fn(&Point) -> T>(&self, f: F) -> Vec<T> {
        self.points().map(|x| f(&x)).collect()
    }

    /// `h^d sum u conj(v)`.
    pub fn inner<A: Scalar, B: Scalar>(&self, u: &[A], v: &[B]) -> C64 {
        debug_assert_eq!(u.len(), self.len);
        debug_assert_eq!(v.len(), self.len);
        let s: C64 = u
            .iter()
            .zip(v)
            .map(|(a, b)| a.to_c64() * b.to_c64().conj())
            .sum();
        s * self.cell_volume()
    }

    pub fn norm<A: Scalar>(&self, u: &[A]) -> f64 {
        let s: f64 = u.iter().map(|a| a.modulus_sqr()).sum();
        (s * self.cell_volume()).sqrt()
    }

    fn build_boundary(&self) -> BoundaryMesh {
        let d = self.spec.dim;
        let n = self.spec.n;
        let weight = self.h.powi(d as i32 - 1);
        let mut nodes = Vec::with_capacity(2 * d * n.pow(d as u32 - 1));
        for axis in 0..d {
            let others: Vec<usize> = (0..d).filter(|&a| a != axis).collect();
            let count = n.pow(d as u32 - 1);
            for high in [false, true] {
                let face = 2 * axis + usize::from(high);
                for t in 0..count {
                    let mut idx = [0usize; 3];
                    let mut rem = t;
                    for &a in others.iter().rev() {
                        idx[a] = rem % n;
                        rem /= n;
                    }
                    let mut position = [0.0; 3];
                    for &a in &others {
                        position[a] = (idx[a] as f64 + 1.0) * self.h;
                    }
                    let mut normal = [0.0; 3];
                    let (first, second) = if high {
                        position[axis] = self.spec.side;
                        normal[axis] = 1.0;
                        (n - 1, n - 2)
                    } else {
                        normal[axis] = -1.0;
                        (0, 1)
                    };
                    idx[axis] = first;
                    let i1 = self.index(idx);
                    idx[axis] = second;
                    let i2 = self.index(idx);
                    nodes.push(BoundaryNode {
                        position,
                        normal,
                        weight,
                        face,
                        inward: [i1, i2],
                    });
                }
            }
        }
        BoundaryMesh { nodes }
    }
}

/// Interior spacing and boundary mesh for the box; corners and edges are excluded.
pub fn make_grid(dim: usize, side: f64, n: usize) -> Result<Grid> {
    Grid::new(GridSpec::new(dim, side, n))
}
