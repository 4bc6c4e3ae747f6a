//! Worst-case interior-point complexity bounds for the two power-minimization
//! schemes. These are order-of-magnitude guides, not predictions.

#[allow(unused_imports)]
use num_traits::Float;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ComplexityEstimate {
    /// `√(0.5N² + 1.5N) · ln(1/ε)`.
    pub sca_iters: f64,
    /// `(MN)² (0.33N³ + 0.5N² + 1.16N + 1)` per iteration.
    pub sca_ops: f64,
    /// `√(M²) · ln(1/ε)`.
    pub sdp_iters: f64,
    /// `0.5N(N+1)M⁶ + 0.25N²(N+1)²M⁴ + 0.125N³(N+1)³` per iteration.
    pub sdp_ops: f64,
}

/// Total dimension of the second-order cones in one SCA subproblem.
pub fn sca_cone_dimension(num_users: usize) -> f64 {
    let n = num_users as f64;
    0.33 * n * n * n + 0.5 * n * n + 1.16 * n + 1.0
}

pub fn complexity_estimate(num_antennas: usize, num_users: usize, eps: f64) -> crate::Result<ComplexityEstimate> {
    if num_antennas == 0 || num_users == 0 {
        return Err(crate::error::invalid("antenna and user counts must be positive"));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(crate::error::invalid("accuracy must lie in (0, 1)"));
    }
    let (m, n) = (num_antennas as f64, num_users as f64);
    let log = (1.0 / eps).ln();
    Ok(ComplexityEstimate {
        sca_iters: (0.5 * n * n + 1.5 * n).sqrt() * log,
        sca_ops: (m * n).powi(2) * sca_cone_dimension(num_users),
        sdp_iters: (m * m).sqrt() * log,
        sdp_ops: 0.5 * n * (n + 1.0) * m.powi(6)
            + 0.25 * n * n * (n + 1.0).powi(2) * m.powi(4)
            + 0.125 * n.powi(3) * (n + 1.0).powi(3),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_users() {
        let e = complexity_estimate(3, 3, 0.1).unwrap();
        assert!((e.sca_iters - 3.0 * 10f64.ln()).abs() < 1e-12);
        assert!((sca_cone_dimension(3) - 17.89).abs() < 1e-9);
        assert!((e.sca_ops - 81.0 * 17.89).abs() < 1e-9);
        assert!((e.sdp_iters - 3.0 * 10f64.ln()).abs() < 1e-12);
        assert!((e.sdp_ops - (6.0 * 729.0 + 36.0 * 81.0 + 216.0)).abs() < 1e-9);
    }

    #[test]
    fn loose_accuracy_needs_no_iterations() {
        let e = complexity_estimate(4, 2, 1.0 - 1e-12).unwrap();
        assert!(e.sca_iters < 1e-10 && e.sdp_iters < 1e-10);
        assert!(complexity_estimate(4, 2, 1.0).is_err());
        assert!(complexity_estimate(0, 2, 0.1).is_err());
    }
}
