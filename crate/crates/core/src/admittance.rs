//! Nodal admittance assembly and slack partitioning.
//!
//! Each branch contributes a 2x2 block to `Y`:
//!
//! ```text
//! line (i, j, y):           [  y        -y       ]
//!                           [ -y         y       ]
//!
//! transformer (primary i,   [  y        -y/K     ]
//! secondary j, y, K):       [ -y/conj(K) y/|K|^2 ]
//! ```
//!
//! Shunts are added on the diagonal. Row/column 0 is the slack bus.

use num_complex::Complex64;

use crate::network::{BranchKind, NetworkDescription};
use crate::sparse::CscMatrix;

/// The full nodal admittance matrix and its load/slack partition.
#[derive(Debug, Clone)]
pub struct AdmittanceSystem {
    /// Full `(N+1) x (N+1)` matrix, slack first.
    pub y: CscMatrix,
    /// Load-by-load block.
    pub y_ll: CscMatrix,
    /// Load-by-slack column.
    pub y_l0: Vec<Complex64>,
    pub slack_voltage: Complex64,
}

impl AdmittanceSystem {
    /// Number of load buses.
    pub fn n(&self) -> usize {
        self.y_l0.len()
    }

    /// Load-bus currents `Y_LL v + Y_L0 v0`.
    pub fn load_currents(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut i = self.y_ll.mul_vec(v);
        for (ik, y0) in i.iter_mut().zip(&self.y_l0) {
            *ik += y0 * self.slack_voltage;
        }
        i
    }
}

/// Stamps every branch block and shunt, then partitions out the slack.
pub fn build_admittance(net: &NetworkDescription) -> AdmittanceSystem {
    let size = net.buses().len();
    let mut triplets = Vec::with_capacity(4 * net.branches().len() + size);
    for br in net.branches() {
        let i = net.bus_index(&br.from).expect("validated endpoint");
        let j = net.bus_index(&br.to).expect("validated endpoint");
        let y = br.admittance;
        let (yii, yij, yji, yjj) = match br.kind {
            BranchKind::Line => (y, -y, -y, y),
            BranchKind::Transformer => {
                let k = br.ratio;
                (y, -y / k, -y / k.conj(), y / k.norm_sqr())
            }
        };
        triplets.extend([(i, i, yii), (i, j, yij), (j, i, yji), (j, j, yjj)]);
    }
    for (i, bus) in net.buses().iter().enumerate() {
        if bus.shunt != Complex64::new(0.0, 0.0) {
            triplets.push((i, i, bus.shunt));
        }
    }
    let y = CscMatrix::from_triplets(size, size, &triplets);

    let n = size - 1;
    let mut ll = Vec::with_capacity(y.nnz());
    let mut y_l0 = vec![Complex64::new(0.0, 0.0); n];
    for (r, c, v) in y.iter() {
        match (r, c) {
            (0, _) => {}
            (r, 0) => y_l0[r - 1] += v,
            (r, c) => ll.push((r - 1, c - 1, v)),
        }
    }
    AdmittanceSystem {
        y_ll: CscMatrix::from_triplets(n, n, &ll),
        y,
        y_l0,
        slack_voltage: net.slack_voltage(),
    }
}
