use crate::error::{FsiError, Result};

/// 1D Lagrange finite element mesh on `[0, L]` with the coupling interface
/// at node 0 (`x = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct StructureMesh {
    nodes: Vec<f64>,
    order: usize,
}

impl StructureMesh {
    pub fn uniform(length: f64, elements: usize, order: usize) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(FsiError::Mesh(format!("length must be positive, got {length}")));
        }
        if elements == 0 {
            return Err(FsiError::Mesh("at least one element required".into()));
        }
        let n = elements * order + 1;
        let nodes = (0..n).map(|i| length * i as f64 / (n - 1) as f64).collect();
        Self::from_nodes(nodes, order)
    }

    /// Mesh from explicit node coordinates; element `e` owns nodes
    /// `e*order ..= (e+1)*order`.
    pub fn from_nodes(nodes: Vec<f64>, order: usize) -> Result<Self> {
        if !(1..=2).contains(&order) {
            return Err(FsiError::Mesh(format!("element order must be 1 or 2, got {order}")));
        }
        if nodes.len() < order + 1 || (nodes.len() - 1) % order != 0 {
            return Err(FsiError::Mesh(format!(
                "{} nodes do not form order-{order} elements",
                nodes.len()
            )));
        }
        if nodes[0] != 0.0 {
            return Err(FsiError::Mesh("interface node must sit at x = 0".into()));
        }
        if let Some(w) = nodes.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(FsiError::Mesh(format!(
                "nodes must be strictly increasing (zero-length element at x = {})",
                w[0]
            )));
        }
        Ok(Self { nodes, order })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        (self.nodes.len() - 1) / self.order
    }

    pub fn interface_node(&self) -> usize {
        0
    }

    pub fn length(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn element_nodes(&self, e: usize) -> std::ops::RangeInclusive<usize> {
        e * self.order..=(e + 1) * self.order
    }
}

/// Shape function values and reference derivatives at `xi` in `[-1, 1]`.
pub(crate) fn shape(order: usize, xi: f64) -> ([f64; 3], [f64; 3]) {
    match order {
        1 => ([(1.0 - xi) / 2.0, (1.0 + xi) / 2.0, 0.0], [-0.5, 0.5, 0.0]),
        _ => (
            [xi * (xi - 1.0) / 2.0, 1.0 - xi * xi, xi * (xi + 1.0) / 2.0],
            [xi - 0.5, -2.0 * xi, xi + 0.5],
        ),
    }
}

/// Gauss-Legendre points and weights on `[-1, 1]`; exact for the mass
/// integrand of the given element order.
pub(crate) fn gauss(order: usize) -> &'static [(f64, f64)] {
    const G2: [(f64, f64); 2] = [(-0.577_350_269_189_625_8, 1.0), (0.577_350_269_189_625_8, 1.0)];
    const G3: [(f64, f64); 3] = [
        (-0.774_596_669_241_483_4, 5.0 / 9.0),
        (0.0, 8.0 / 9.0),
        (0.774_596_669_241_483_4, 5.0 / 9.0),
    ];
    if order == 1 {
        &G2
    } else {
        &G3
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_meshes() {
        let m = StructureMesh::uniform(0.1, 4, 2).unwrap();
        assert_eq!(m.num_nodes(), 9);
        assert_eq!(m.num_elements(), 4);
        assert_eq!(m.element_nodes(1), 2..=4);
        assert!((m.length() - 0.1).abs() < 1e-15);
        assert_eq!(m.interface_node(), 0);
    }

    #[test]
    fn invalid_meshes() {
        assert!(StructureMesh::uniform(0.0, 4, 1).is_err());
        assert!(StructureMesh::uniform(1.0, 0, 1).is_err());
        assert!(StructureMesh::uniform(1.0, 2, 3).is_err());
        assert!(StructureMesh::from_nodes(vec![0.0, 0.5, 0.5, 1.0], 1).is_err());
        assert!(StructureMesh::from_nodes(vec![0.0, 0.5, 1.0, 1.5], 2).is_err());
        assert!(StructureMesh::from_nodes(vec![0.1, 0.5], 1).is_err());
    }

    #[test]
    fn shape_partition_of_unity() {
        for order in [1, 2] {
            for &xi in &[-1.0, -0.3, 0.0, 0.7, 1.0] {
                let (n, dn) = shape(order, xi);
                assert!((n.iter().sum::<f64>() - 1.0).abs() < 1e-15);
                assert!(dn.iter().sum::<f64>().abs() < 1e-15);
            }
        }
    }
}
