use crate::error::{ensure_dim, ensure_finite, Result};

/// GAE over one episode.
///
/// `values[t] = V(s_t)`; `bootstrap` is `V(s_n)` for a time-limit truncation
/// and `0` for a true terminal. Returns `(advantages, value_targets)` with
/// `targets = advantages + values`.
pub fn compute_gae(rewards: &[f64], values: &[f64], bootstrap: f64, gamma: f64, lambda: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    ensure_dim("gae values", rewards.len(), values.len())?;
    ensure_finite("gae rewards", rewards)?;
    ensure_finite("gae values", values)?;
    let n = rewards.len();
    let mut advantages = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let next_value = if t + 1 < n { values[t + 1] } else { bootstrap };
        let delta = rewards[t] + gamma * next_value - values[t];
        running = delta + gamma * lambda * running;
        advantages[t] = running;
    }
    let targets = advantages.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((advantages, targets))
}

/// GAE where each advantage sums at most `horizon` TD errors:
/// `A_t = sum_{l < H} (gamma lambda)^l delta_{t+l}`. With `lambda = 1` this is
/// the H-step return `sum_{l<H} gamma^l r_{t+l} + gamma^H V(s_{t+H}) - V(s_t)`.
/// `horizon = 0` means no truncation.
pub fn compute_gae_truncated(
    rewards: &[f64],
    values: &[f64],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
    horizon: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (full, _) = compute_gae(rewards, values, bootstrap, gamma, lambda)?;
    let n = rewards.len();
    if horizon == 0 || horizon >= n {
        let targets = full.iter().zip(values).map(|(a, v)| a + v).collect();
        return Ok((full, targets));
    }
    let decay = (gamma * lambda).powi(horizon as i32);
    let advantages: Vec<f64> = (0..n)
        .map(|t| if t + horizon < n { full[t] - decay * full[t + horizon] } else { full[t] })
        .collect();
    let targets = advantages.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((advantages, targets))
}
