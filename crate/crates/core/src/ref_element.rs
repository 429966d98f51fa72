//! Lagrange shape functions on the reference triangle and symmetric
//! quadrature rules.
//!
//! The reference triangle has vertices (0,0), (1,0), (0,1) and area 1/2.
//! Points are given in barycentric coordinates `(λ0, λ1, λ2)`; the reference
//! coordinates are `(ξ, η) = (λ1, λ2)`.
//!
//! Local node ordering for quadratic elements: the three vertices, then the
//! three mid-edge nodes, where mid-edge node `3 + i` lies on the edge opposite
//! vertex `i`:
//!
//! ```text
//!   node 3: edge (1,2)    node 4: edge (2,0)    node 5: edge (0,1)
//! ```

use crate::error::{Error, Result};

/// Barycentric coordinates of a point in the reference triangle.
pub type Barycentric = [f64; 3];

/// Reference-coordinate gradients of the barycentric coordinates.
const DLAMBDA: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];

/// Mid-edge node `3 + i` sits on the edge `EDGE_OPPOSITE[i]`.
pub const EDGE_OPPOSITE: [[usize; 2]; 3] = [[1, 2], [2, 0], [0, 1]];

/// Number of local nodes of a degree-`k` triangle.
pub fn local_node_count(degree: usize) -> Result<usize> {
    match degree {
        1 => Ok(3),
        2 => Ok(6),
        k => Err(Error::UnsupportedDegree(k)),
    }
}

/// Barycentric coordinates of the local nodes.
pub fn local_nodes(degree: usize) -> Result<Vec<Barycentric>> {
    let mut nodes = vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    match degree {
        1 => {}
        2 => nodes.extend([[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]]),
        k => return Err(Error::UnsupportedDegree(k)),
    }
    Ok(nodes)
}

pub fn eval_basis(degree: usize, lambda: Barycentric) -> Result<Vec<f64>> {
    let [l0, l1, l2] = lambda;
    match degree {
        1 => Ok(vec![l0, l1, l2]),
        2 => Ok(vec![
            l0 * (2.0 * l0 - 1.0),
            l1 * (2.0 * l1 - 1.0),
            l2 * (2.0 * l2 - 1.0),
            4.0 * l1 * l2,
            4.0 * l2 * l0,
            4.0 * l0 * l1,
        ]),
        k => Err(Error::UnsupportedDegree(k)),
    }
}

/// Gradients of the basis functions with respect to the reference
/// coordinates `(ξ, η)`.
pub fn eval_basis_grad(degree: usize, lambda: Barycentric) -> Result<Vec<[f64; 2]>> {
    match degree {
        1 => Ok(DLAMBDA.to_vec()),
        2 => {
            let mut grads = Vec::with_capacity(6);
            for i in 0..3 {
                let s = 4.0 * lambda[i] - 1.0;
                grads.push([s * DLAMBDA[i][0], s * DLAMBDA[i][1]]);
            }
            for [a, b] in EDGE_OPPOSITE {
                grads.push([
                    4.0 * (lambda[b] * DLAMBDA[a][0] + lambda[a] * DLAMBDA[b][0]),
                    4.0 * (lambda[b] * DLAMBDA[a][1] + lambda[a] * DLAMBDA[b][1]),
                ]);
            }
            Ok(grads)
        }
        k => Err(Error::UnsupportedDegree(k)),
    }
}

/// A symmetric quadrature rule on the reference triangle. Weights sum to the
/// reference area 1/2.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    pub degree: usize,
    pub points: Vec<Barycentric>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Default exactness degree used for assembly.
pub const DEFAULT_QUADRATURE_DEGREE: usize = 6;

// Orbit generators. `s3` is the centroid, `s21(a, w)` the three points
// (a, b, b) with b = (1 - a)/2, `s111(a, b, w)` the six permutations of
// (a, b, 1 - a - b).
fn s21(rule: &mut QuadratureRule, a: f64, w: f64) {
    let b = 0.5 * (1.0 - a);
    for p in [[a, b, b], [b, a, b], [b, b, a]] {
        rule.points.push(p);
        rule.weights.push(w);
    }
}

fn s111(rule: &mut QuadratureRule, a: f64, b: f64, w: f64) {
    let c = 1.0 - a - b;
    for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
        rule.points.push(p);
        rule.weights.push(w);
    }
}

/// Smallest tabulated rule with all weights positive that integrates every
/// polynomial of total degree `exactness_degree` exactly.
pub fn quadrature(exactness_degree: usize) -> Result<QuadratureRule> {
    let third = 1.0 / 3.0;
    let mut rule = QuadratureRule {
        degree: 0,
        points: Vec::new(),
        weights: Vec::new(),
    };
    match exactness_degree {
        0 | 1 => {
            rule.degree = 1;
            rule.points.push([third; 3]);
            rule.weights.push(0.5);
        }
        2 => {
            rule.degree = 2;
            s21(&mut rule, 2.0 / 3.0, 1.0 / 6.0);
        }
        3 | 4 => {
            rule.degree = 4;
            s21(&mut rule, 0.108_103_018_168_070_23, 0.111_690_794_839_005_73);
            s21(&mut rule, 0.816_847_572_980_458_5, 0.054_975_871_827_660_934);
        }
        5 => {
            rule.degree = 5;
            let r15 = 15f64.sqrt();
            rule.points.push([third; 3]);
            rule.weights.push(9.0 / 80.0);
            s21(&mut rule, 1.0 - 2.0 * (6.0 - r15) / 21.0, (155.0 - r15) / 2400.0);
            s21(&mut rule, 1.0 - 2.0 * (6.0 + r15) / 21.0, (155.0 + r15) / 2400.0);
        }
        6 => {
            rule.degree = 6;
            s21(&mut rule, 0.501_426_509_658_178_99, 0.058_393_137_863_189_614);
            s21(&mut rule, 0.873_821_971_016_995_6, 0.025_422_453_185_103_387);
            s111(
                &mut rule,
                0.053_145_049_844_817_005,
                0.310_352_451_033_784_32,
                0.041_425_537_809_186_833,
            );
        }
        d => return Err(Error::QuadratureDegree(d)),
    }
    Ok(rule)
}

/// Basis values and reference gradients tabulated at the points of a
/// quadrature rule.
#[derive(Clone, Debug)]
pub struct ShapeFunctionSet {
    pub degree: usize,
    pub n_loc: usize,
    /// `values[q][a]`
    pub values: Vec<Vec<f64>>,
    /// `grads[q][a]`
    pub grads: Vec<Vec<[f64; 2]>>,
}

impl ShapeFunctionSet {
    pub fn new(degree: usize, rule: &QuadratureRule) -> Result<Self> {
        let n_loc = local_node_count(degree)?;
        let values = rule
            .points
            .iter()
            .map(|&p| eval_basis(degree, p))
            .collect::<Result<Vec<_>>>()?;
        let grads = rule
            .points
            .iter()
            .map(|&p| eval_basis_grad(degree, p))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            degree,
            n_loc,
            values,
            grads,
        })
    }
}
