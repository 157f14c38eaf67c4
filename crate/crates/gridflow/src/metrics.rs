//! Decision-quality metrics.

/// Power-loss regret: loss under predicted decisions minus loss under oracle
/// decisions, both evaluated against the same ground truth. Nonnegative up
/// to solver tolerance whenever the oracle's feasible set covers the
/// evaluated flow.
pub fn regret(loss_predicted_kw: f64, loss_oracle_kw: f64) -> f64 {
    loss_predicted_kw - loss_oracle_kw
}

/// Fraction of timestep instances where any bus leaves the voltage box by
/// more than `tol` (in squared-voltage units).
pub fn violation_rate(v_series: &[Vec<f64>], v_min2: f64, v_max2: f64, tol: f64) -> f64 {
    if v_series.is_empty() {
        return 0.0;
    }
    let violating = v_series
        .iter()
        .filter(|vs| {
            vs.iter()
                .any(|&v| v > v_max2 + tol || v < v_min2 - tol)
        })
        .count();
    violating as f64 / v_series.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regret_of_identical_losses_is_zero() {
        assert_eq!(regret(42.0, 42.0), 0.0);
    }

    #[test]
    fn violation_rate_counts_timesteps() {
        // 24 timesteps, one violating at a single bus
        let mut series = vec![vec![1.0, 1.0]; 24];
        series[7][1] = 1.1025 + 2e-4; // above (1.05)^2 by more than tol
        let rate = violation_rate(&series, 0.9025, 1.1025, 1e-4);
        assert!((rate - 1.0 / 24.0).abs() < 1e-12);
    }

    #[test]
    fn all_nominal_voltages_give_zero_rate() {
        let series = vec![vec![1.0; 33]; 24];
        assert_eq!(violation_rate(&series, 0.9025, 1.1025, 1e-4), 0.0);
    }
}
