use crate::error::{Error, Result};

/// Nodal values of a (possibly vector-valued) finite element function.
///
/// Components are stored blocked: entry `j + ℓ·N` is component `ℓ` at node
/// `j`. This matches the block-identity structure `I_d ⊗ M` of the lifted
/// matrices, so every component is a contiguous slice.
#[derive(Clone, Debug, PartialEq)]
pub struct NodalField {
    n_nodes: usize,
    dim: usize,
    data: Vec<f64>,
}

impl NodalField {
    pub fn zeros(n_nodes: usize, dim: usize) -> Self {
        Self {
            n_nodes,
            dim,
            data: vec![0.0; n_nodes * dim],
        }
    }

    pub fn from_vec(n_nodes: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_nodes * dim {
            return Err(Error::DimensionMismatch {
                expected: n_nodes * dim,
                got: data.len(),
            });
        }
        Ok(Self { n_nodes, dim, data })
    }

    /// Builds a field by evaluating `f` at every node.
    pub fn from_fn<F: FnMut(usize) -> Vec<f64>>(n_nodes: usize, dim: usize, mut f: F) -> Self {
        let mut out = Self::zeros(n_nodes, dim);
        for j in 0..n_nodes {
            let v = f(j);
            debug_assert_eq!(v.len(), dim);
            for (l, vl) in v.into_iter().enumerate() {
                out.data[j + l * n_nodes] = vl;
            }
        }
        out
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn component(&self, l: usize) -> &[f64] {
        &self.data[l * self.n_nodes..(l + 1) * self.n_nodes]
    }

    pub fn component_mut(&mut self, l: usize) -> &mut [f64] {
        &mut self.data[l * self.n_nodes..(l + 1) * self.n_nodes]
    }

    /// The three components at node `j` of a vector field.
    pub fn node3(&self, j: usize) -> [f64; 3] {
        debug_assert!(self.dim >= 3);
        let n = self.n_nodes;
        [self.data[j], self.data[j + n], self.data[j + 2 * n]]
    }

    pub fn set_node3(&mut self, j: usize, v: [f64; 3]) {
        let n = self.n_nodes;
        self.data[j] = v[0];
        self.data[j + n] = v[1];
        self.data[j + 2 * n] = v[2];
    }

    /// A new field made of the components `range` of this one.
    pub fn slice_components(&self, range: std::ops::Range<usize>) -> NodalField {
        let n = self.n_nodes;
        NodalField {
            n_nodes: n,
            dim: range.len(),
            data: self.data[range.start * n..range.end * n].to_vec(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Position vector of the mesh nodes (a three-component nodal field).
pub type PositionVector = NodalField;
