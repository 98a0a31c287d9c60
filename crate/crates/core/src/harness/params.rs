use serde::{Deserialize, Serialize};

use crate::qnet::N_ACTIONS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParameterCount {
    pub weights: u64,
    pub biases: u64,
    pub total: u64,
}

/// Parameters of the `[S*N, S*N, S*N, 3]` network fed `n_slices` slices of `n_features` features.
pub fn count_parameters(n_features: usize, n_slices: usize) -> ParameterCount {
    let width = (n_features * n_slices) as u64;
    let actions = N_ACTIONS as u64;
    let weights = 2 * width * width + actions * width;
    let biases = 2 * width + actions;
    ParameterCount {
        weights,
        biases,
        total: weights + biases,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qnet::QNetwork;

    #[test]
    fn matches_constructed_network() {
        for (f, s) in [(3, 1), (4, 2), (7, 3)] {
            let net = QNetwork::<f32>::for_input(f, s, 0).unwrap();
            let count = count_parameters(f, s);
            assert_eq!(count.total as usize, net.parameter_count());
            let weights: usize = net.layers().iter().map(|l| l.weights.len()).sum();
            assert_eq!(count.weights as usize, weights);
        }
    }

    #[test]
    fn catch_sizes() {
        let c = count_parameters(234, 5);
        assert_eq!(c.weights, 2 * 1170 * 1170 + 3 * 1170);
        assert_eq!(c.biases, 2 * 1170 + 3);
    }
}
