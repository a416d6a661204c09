use serde::{Deserialize, Serialize};

/// Empirical approximate internal state: the current observation and whether
/// the human followed the last two recommendations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AdherenceState {
    pub y: usize,
    pub a_prev: bool,
    pub a_prev2: bool,
}

/// Adherence flags start at 1: there is no evidence of deviation yet.
pub fn adherence_init(y0: usize) -> AdherenceState {
    AdherenceState {
        y: y0,
        a_prev: true,
        a_prev2: true,
    }
}

/// Shift-register update. Uses only its arguments, never the strategy that
/// produced them.
pub fn adherence_step(state: AdherenceState, u_ai: usize, u_h: usize, y_next: usize) -> AdherenceState {
    AdherenceState {
        y: y_next,
        a_prev: u_h == u_ai,
        a_prev2: state.a_prev,
    }
}

impl AdherenceState {
    /// Number of distinct states for `n_obs` observations.
    pub fn count(n_obs: usize) -> usize {
        4 * n_obs
    }

    /// Dense index `y·4 + 2·a_prev + a_prev2`.
    pub fn index(&self) -> usize {
        self.y * 4 + 2 * usize::from(self.a_prev) + usize::from(self.a_prev2)
    }

    pub fn from_index(i: usize) -> Self {
        Self {
            y: i / 4,
            a_prev: (i / 2) % 2 == 1,
            a_prev2: i % 2 == 1,
        }
    }

    /// One-hot observation followed by the two flags.
    pub fn features(&self, n_obs: usize) -> Vec<f64> {
        let mut f = vec![0.0; n_obs + 2];
        self.write_features(n_obs, &mut f);
        f
    }

    pub(crate) fn write_features(&self, n_obs: usize, out: &mut [f64]) {
        for v in out[..n_obs].iter_mut() {
            *v = 0.0;
        }
        out[self.y] = 1.0;
        out[n_obs] = f64::from(u8::from(self.a_prev));
        out[n_obs + 1] = f64::from(u8::from(self.a_prev2));
    }
}

/// Decoder input: adherence features followed by a one-hot recommendation.
pub fn decoder_input(state: &AdherenceState, u_ai: usize, n_obs: usize, n_actions: usize) -> Vec<f64> {
    let mut v = vec![0.0; n_obs + 2 + n_actions];
    state.write_features(n_obs, &mut v);
    v[n_obs + 2 + u_ai] = 1.0;
    v
}
